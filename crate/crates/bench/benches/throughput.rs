// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mulife_core::aging::{circuit_lifetime, site_lifetime};
use mulife_core::logicsim::{profile_sim, profile_stream, Simulator};
use mulife_core::netlist::build_multiplier;
use mulife_core::oracle::build_oracle;
use mulife_core::selector::synthesize;
use mulife_core::{AgingParams, Arch, BetaModel, InputPair, PvSample, TransformPolicy, WorkloadSpec};

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("profile");
    for w in [4, 8] {
        let n = build_multiplier(w, Arch::ArraySignedBw).unwrap();
        let sim = Simulator::new(&n).unwrap();
        let pairs: Vec<InputPair> = (0..4096u64).map(|i| InputPair::from_index(i * 2654435761 % (1 << (2 * w)), w)).collect();
        g.throughput(Throughput::Elements(pairs.len() as u64));
        g.bench_with_input(BenchmarkId::new("stream_4096", w), &pairs, |b, p| {
            b.iter(|| profile_stream(&sim, black_box(p), &TransformPolicy::None, 0).unwrap())
        });
    }
    let n = build_multiplier(8, Arch::ArraySignedBw).unwrap();
    let sim = Simulator::new(&n).unwrap();
    g.throughput(Throughput::Elements(1 << 16));
    g.sample_size(20);
    g.bench_function("exhaustive_w8", |b| b.iter(|| profile_sim(&sim, &WorkloadSpec::Exhaustive, &TransformPolicy::None).unwrap()));
    g.finish();
}

fn lifetime(c: &mut Criterion) {
    let n = build_multiplier(8, Arch::ArraySignedBw).unwrap();
    let prof = profile_sim(&Simulator::new(&n).unwrap(), &WorkloadSpec::Exhaustive, &TransformPolicy::None).unwrap();
    let p = AgingParams::default();
    let pv = mulife_core::aging::sample_pv(&p, n.site_count(), 1);
    c.bench_function("circuit_lifetime_w8", |b| b.iter(|| circuit_lifetime(black_box(&prof), &pv, &p).unwrap()));
    let rd = AgingParams { beta_model: BetaModel::RdLongTerm { c: 1.0, d: 1.2 }, ..AgingParams::default() };
    c.bench_function("site_lifetime_bisect_rd", |b| b.iter(|| site_lifetime(black_box(0.7), 0.01, &rd).unwrap()));
}

fn synthesis(c: &mut Criterion) {
    let n = build_multiplier(8, Arch::ArraySignedBw).unwrap();
    let p = AgingParams::no_pv();
    let mut g = c.benchmark_group("synthesis");
    g.sample_size(10);
    g.bench_function("oracle_w8", |b| {
        b.iter(|| build_oracle(&n, &p, &PvSample::zeros(n.site_count()), &WorkloadSpec::Exhaustive).unwrap())
    });
    let o = Arc::new(build_oracle(&n, &p, &PvSample::zeros(n.site_count()), &WorkloadSpec::Exhaustive).unwrap());
    for k in [4, 6] {
        g.bench_with_input(BenchmarkId::new("selector", k), &k, |b, &k| b.iter(|| synthesize(&o, k).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, simulation, lifetime, synthesis);
criterion_main!(benches);
