// SPDX-License-Identifier: Apache-2.0

//! A D×D output-stationary systolic array of multiply-accumulate PEs, each
//! with its own multiplier instance, process-variation sample, stress
//! profile and mitigation policy.
//!
//! Row operands stream across, column operands down. Their negations are
//! formed once at the array boundary, and each PE picks either `(x, w)` or
//! `(−x, −w)` per product. Only the multiset of pairs a PE multiplies
//! affects its stress, so Monte Carlo runs feed each PE its pair stream
//! directly instead of stepping the dataflow.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aging::{circuit_lifetime, sample_pv, AgingParams, F2FSet, PvSample};
use crate::baselines::{dvfs_lifetime, DvfsParams};
use crate::logicsim::{lane_mask, min_signed, negate, profile_stream, InputPair, Simulator, StressProfile, Transform, TransformPolicy};
use crate::netlist::{build_multiplier, Arch, Netlist};
use crate::oracle::OracleTable;
use crate::rng;
use crate::selector::{Ensemble, SelectorFn};
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 8;

const TAG_PV: u64 = 0x7076;
const TAG_ROW: u64 = 0x726f;
const TAG_COL: u64 = 0x636f;
const TAG_TRNG: u64 = 0x7472;

#[derive(Clone, Debug)]
pub enum Mitigation {
    None,
    Oracle(Arc<OracleTable>),
    Sm(Arc<SelectorFn>),
    /// Each PE runs the member dispatched from its no-mitigation F2F set.
    Ensemble(Arc<Ensemble>),
    Trng { p: f64 },
    Zbp,
    /// Supply compensation; the stress profile is the unmitigated one.
    Dvfs(DvfsParams),
}

impl Mitigation {
    pub fn name(&self) -> String {
        match self {
            Mitigation::None => "none".into(),
            Mitigation::Oracle(_) => "oracle".into(),
            Mitigation::Sm(s) => format!("sm(k={})", s.k()),
            Mitigation::Ensemble(e) => format!("ensemble(P={})", e.len()),
            Mitigation::Trng { p } => format!("trng({p})"),
            Mitigation::Zbp => "zbp".into(),
            Mitigation::Dvfs(_) => "dvfs".into(),
        }
    }

    /// Whether the matrix product is unaffected by the mitigation.
    pub fn preserves_products(&self) -> bool {
        !matches!(self, Mitigation::Trng { .. } | Mitigation::Zbp)
    }

    fn needs_measurement(&self) -> bool {
        matches!(self, Mitigation::Ensemble(_))
    }

    fn width(&self) -> Option<usize> {
        match self {
            Mitigation::Oracle(o) => Some(o.width()),
            Mitigation::Sm(s) => Some(s.width()),
            Mitigation::Ensemble(e) => Some(e.width()),
            _ => None,
        }
    }

    /// The policy PE `pe` runs. `measured` is its no-mitigation F2F set and
    /// is required for ensembles.
    pub fn policy(&self, seed: u64, pe: usize, measured: Option<&F2FSet>) -> Result<TransformPolicy> {
        Ok(match self {
            Mitigation::None | Mitigation::Dvfs(_) => TransformPolicy::None,
            Mitigation::Oracle(o) => TransformPolicy::Oracle(o.clone()),
            Mitigation::Sm(s) => TransformPolicy::Selector(s.clone()),
            Mitigation::Ensemble(e) => {
                let m = measured.ok_or_else(|| Error::input("ensemble dispatch needs a measured F2F set"))?;
                TransformPolicy::ensemble(e.clone(), m.clone())
            }
            Mitigation::Trng { p } => TransformPolicy::Trng { p: *p, seed: rng::derive(seed, &[TAG_TRNG, pe as u64]) },
            Mitigation::Zbp => TransformPolicy::Zbp,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SaConfig {
    pub dim: usize,
    /// The signed multiplier every PE instantiates.
    pub netlist: Arc<Netlist>,
    pub mitigation: Mitigation,
    pub aging: AgingParams,
    /// Matrix products streamed per Monte Carlo iteration.
    pub rounds: usize,
    /// Shared dimension of each product; a PE multiplies `rounds · inner`
    /// pairs per iteration.
    pub inner: usize,
    /// Signed accumulator width in bits.
    pub acc_bits: u32,
}

impl SaConfig {
    pub fn new(netlist: Arc<Netlist>) -> Self {
        SaConfig {
            dim: DEFAULT_DIM,
            netlist,
            mitigation: Mitigation::None,
            aging: AgingParams::default(),
            rounds: 16,
            inner: 256,
            acc_bits: 32,
        }
    }

    /// Array of generated multipliers.
    pub fn generated(width: usize, arch: Arch) -> Result<Self> {
        Ok(Self::new(Arc::new(build_multiplier(width, arch)?)))
    }

    pub fn width(&self) -> usize {
        self.netlist.width
    }

    pub fn pes(&self) -> usize {
        self.dim * self.dim
    }

    pub fn pairs_per_pe(&self) -> usize {
        self.rounds * self.inner
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("array dimension must be at least 1"));
        }
        if self.pairs_per_pe() == 0 {
            return Err(Error::config("rounds and inner must be positive"));
        }
        if !self.netlist.arch.is_signed_multiplier() {
            return Err(Error::config(format!("{} is not a signed multiplier", self.netlist.arch)));
        }
        let width = self.width();
        if !(2 * width as u32..=127).contains(&self.acc_bits) {
            return Err(Error::config(format!("accumulator of {} bits cannot hold a {}-bit product", self.acc_bits, 2 * width)));
        }
        if let Some(w) = self.mitigation.width() {
            if w != width {
                return Err(Error::config(format!("mitigation width {w} does not match array width {width}")));
            }
        }
        if let Mitigation::Trng { p } = self.mitigation {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("trng probability {p} outside [0, 1]")));
            }
        }
        if let Mitigation::Dvfs(d) = &self.mitigation {
            d.validate(&self.aging)?;
        }
        self.aging.validate()
    }
}

/// Row-major integer matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::input("ragged matrix rows"));
        }
        Ok(Matrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    /// Exact integer product, for reference.
    pub fn mul(&self, other: &Matrix) -> Option<Matrix> {
        if self.cols != other.rows {
            return None;
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                out.data[r * other.cols + c] = (0..self.cols).map(|k| self.get(r, k) * other.get(k, c)).sum();
            }
        }
        Some(out)
    }
}

#[derive(Clone, Debug)]
pub struct PeState {
    pub row: usize,
    pub col: usize,
    pub profile: StressProfile,
    pub pv: PvSample,
    pub policy: TransformPolicy,
}

impl PeState {
    pub fn new(row: usize, col: usize, sites: usize, pv: PvSample, policy: TransformPolicy) -> Self {
        PeState { row, col, profile: StressProfile::empty(sites), pv, policy }
    }

    fn absorb(&mut self, p: &StressProfile) {
        self.profile.merge(p);
    }
}

/// Fresh PE states for the whole array. `measured` holds each PE's
/// no-mitigation F2F set, needed only for ensembles.
pub fn pe_states(cfg: &SaConfig, pv: Vec<PvSample>, seed: u64, measured: Option<&[F2FSet]>) -> Result<Vec<PeState>> {
    cfg.validate()?;
    let sites = cfg.netlist.site_count();
    if pv.len() != cfg.pes() || pv.iter().any(|s| s.len() != sites) {
        return Err(Error::input(format!("pv must cover {} PEs of {sites} sites", cfg.pes())));
    }
    if let Some(m) = measured {
        if m.len() != cfg.pes() {
            return Err(Error::input("one measured F2F set per PE required"));
        }
    }
    pv.into_iter()
        .enumerate()
        .map(|(pe, pv)| {
            let policy = cfg.mitigation.policy(seed, pe, measured.map(|m| &m[pe]))?;
            Ok(PeState::new(pe / cfg.dim, pe % cfg.dim, sites, pv, policy))
        })
        .collect()
}

fn signed_range(width: usize) -> std::ops::RangeInclusive<i64> {
    -(1i64 << (width - 1))..=(1i64 << (width - 1)) - 1
}

/// Multiply `x · w` on the array, updating every PE's stress profile.
/// Output `(r, c)` is accumulated by PE `(r mod D, c mod D)`.
pub fn matmul(cfg: &SaConfig, x: &Matrix, w: &Matrix, states: &mut [PeState]) -> Result<Matrix> {
    cfg.validate()?;
    if x.cols != w.rows {
        return Err(Error::input(format!("cannot multiply {}x{} by {}x{}", x.rows, x.cols, w.rows, w.cols)));
    }
    if states.len() != cfg.pes() {
        return Err(Error::input(format!("{} PE states for a {}x{} array", states.len(), cfg.dim, cfg.dim)));
    }
    let width = cfg.width();
    let range = signed_range(width);
    if let Some(v) = x.data.iter().chain(&w.data).find(|v| !range.contains(v)) {
        return Err(Error::input(format!("entry {v} does not fit {width}-bit two's complement")));
    }
    let sim = Simulator::new(&cfg.netlist)?;
    let mask = sim.operand_mask();
    let bits = |v: i64| (v as u64) & mask;
    // Boundary negation, once per streamed operand.
    let xs: Vec<(u64, u64)> = x.data.iter().map(|&v| (bits(v), negate(bits(v), width))).collect();
    let ws: Vec<(u64, u64)> = w.data.iter().map(|&v| (bits(v), negate(bits(v), width))).collect();
    let acc_range = -(1i128 << (cfg.acc_bits - 1))..(1i128 << (cfg.acc_bits - 1));

    let mut out = Matrix::zeros(x.rows, w.cols);
    let mut block = sim.new_block();
    for r in 0..x.rows {
        for c in 0..w.cols {
            let pe = &mut states[(r % cfg.dim) * cfg.dim + c % cfg.dim];
            let mut acc: i128 = 0;
            let mut zeros = vec![0u64; pe.profile.site_count()];
            for k0 in (0..x.cols).step_by(64) {
                let k1 = (k0 + 64).min(x.cols);
                let first = pe.profile.vectors + k0 as u64;
                let applied: Vec<InputPair> = (k0..k1)
                    .map(|k| {
                        let (xv, xn) = xs[r * x.cols + k];
                        let (wv, wn) = ws[k * w.cols + c];
                        let v = InputPair::new(xv, wv);
                        match pe.policy.transform(v, first + (k - k0) as u64) {
                            Transform::Identity => v,
                            Transform::Negate => InputPair::new(xn, wn),
                            Transform::Complement => v.complemented(width),
                        }
                    })
                    .collect();
                sim.eval_block(&applied, &mut block);
                for lane in 0..applied.len() {
                    acc += sim.output_value(&block, lane);
                    if !acc_range.contains(&acc) {
                        return Err(Error::config(format!("accumulator overflow at output ({r}, {c}) with {} bits", cfg.acc_bits)));
                    }
                }
                let lanes = lane_mask(applied.len());
                for (z, &net) in zeros.iter_mut().zip(sim.site_nets()) {
                    *z += (!block.nets[net as usize] & lanes).count_ones() as u64;
                }
            }
            pe.absorb(&StressProfile { zero_counts: zeros, vectors: x.cols as u64, t_data: pe.profile.t_data });
            out.data[r * w.cols + c] = acc as i64;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaLifetime {
    pub seconds: f64,
    pub row: usize,
    pub col: usize,
}

fn pe_lifetime(cfg: &SaConfig, profile: &StressProfile, pv: &PvSample) -> Result<f64> {
    match &cfg.mitigation {
        Mitigation::Dvfs(d) => dvfs_lifetime(profile, pv, &cfg.aging, d),
        _ => Ok(circuit_lifetime(profile, pv, &cfg.aging)?.0),
    }
}

/// Array lifetime: the earliest PE failure. Ties go to the first PE in
/// row-major order.
pub fn sa_lifetime(cfg: &SaConfig, states: &[PeState]) -> Result<SaLifetime> {
    if states.len() != cfg.pes() {
        return Err(Error::input(format!("{} PE states for a {}x{} array", states.len(), cfg.dim, cfg.dim)));
    }
    let mut best = SaLifetime { seconds: f64::INFINITY, row: 0, col: 0 };
    for s in states {
        if s.profile.vectors == 0 {
            return Err(Error::input(format!("PE ({}, {}) has not been profiled", s.row, s.col)));
        }
        let l = pe_lifetime(cfg, &s.profile, &s.pv)?;
        if l < best.seconds {
            best = SaLifetime { seconds: l, row: s.row, col: s.col };
        }
    }
    Ok(best)
}

/// Operand bits of the `i`-th streamed row or column value.
fn operand(seed: u64, tag: u64, round: usize, a: usize, b: usize, mask: u64) -> u64 {
    rng::derive(seed, &[tag, round as u64, a as u64, b as u64]) & mask
}

/// Matrices `X` (D × inner) and `W` (inner × D) of product `round`.
pub fn round_matrices(cfg: &SaConfig, seed: u64, round: usize) -> (Matrix, Matrix) {
    let mask = (1u64 << cfg.width()) - 1;
    let signed = |u: u64| crate::logicsim::to_signed(u, cfg.width());
    let mut x = Matrix::zeros(cfg.dim, cfg.inner);
    let mut w = Matrix::zeros(cfg.inner, cfg.dim);
    for i in 0..cfg.dim {
        for k in 0..cfg.inner {
            x.data[i * cfg.inner + k] = signed(operand(seed, TAG_ROW, round, i, k, mask));
            w.data[k * cfg.dim + i] = signed(operand(seed, TAG_COL, round, k, i, mask));
        }
    }
    (x, w)
}

/// The pairs each PE multiplies over `cfg.rounds` products seeded by
/// `seed`, in stream order; PE index is `row · D + col`.
pub fn pe_streams(cfg: &SaConfig, seed: u64) -> Vec<Vec<InputPair>> {
    let mask = (1u64 << cfg.width()) - 1;
    let mut streams = vec![Vec::with_capacity(cfg.pairs_per_pe()); cfg.pes()];
    for round in 0..cfg.rounds {
        let xs: Vec<u64> = (0..cfg.dim * cfg.inner).map(|j| operand(seed, TAG_ROW, round, j / cfg.inner, j % cfg.inner, mask)).collect();
        let ws: Vec<u64> = (0..cfg.inner * cfg.dim).map(|j| operand(seed, TAG_COL, round, j / cfg.dim, j % cfg.dim, mask)).collect();
        for r in 0..cfg.dim {
            for c in 0..cfg.dim {
                let s = &mut streams[r * cfg.dim + c];
                s.extend((0..cfg.inner).map(|k| InputPair::new(xs[r * cfg.inner + k], ws[k * cfg.dim + c])));
            }
        }
    }
    streams
}

/// Per-PE variation samples for one Monte Carlo iteration.
pub fn pe_pv(cfg: &SaConfig, sites: usize, iteration_seed: u64) -> Vec<PvSample> {
    (0..cfg.pes()).map(|pe| sample_pv(&cfg.aging, sites, rng::derive(iteration_seed, &[TAG_PV, pe as u64]))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scenario: String,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeStats {
    pub scenario: String,
    pub iterations: usize,
    pub lifetimes: Vec<f64>,
    /// Failing PE `(row, col)` per iteration.
    pub argmin: Vec<(usize, usize)>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub normalization: Option<Normalization>,
}

impl LifetimeStats {
    pub fn new(scenario: impl Into<String>, results: Vec<SaLifetime>) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::input("no iterations"));
        }
        let lifetimes: Vec<f64> = results.iter().map(|r| r.seconds).collect();
        let n = lifetimes.len() as f64;
        let mean = lifetimes.iter().sum::<f64>() / n;
        let std = if lifetimes.len() > 1 {
            (lifetimes.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(LifetimeStats {
            scenario: scenario.into(),
            iterations: lifetimes.len(),
            min: lifetimes.iter().copied().fold(f64::INFINITY, f64::min),
            max: lifetimes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            argmin: results.iter().map(|r| (r.row, r.col)).collect(),
            lifetimes,
            mean,
            std,
            normalization: None,
        })
    }

    pub fn normalize_to(&mut self, scenario: &str, mean: f64) {
        self.normalization = Some(Normalization { scenario: scenario.into(), mean });
    }

    pub fn normalized_mean(&self) -> Option<f64> {
        self.normalization.as_ref().map(|n| self.mean / n.mean)
    }

    /// Equal-width bins over `[min, max]`; the last bin is closed.
    pub fn histogram(&self, bins: usize) -> Histogram {
        let bins = bins.max(1);
        let span = self.max - self.min;
        let edges = (0..=bins).map(|i| self.min + span * i as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for &l in &self.lifetimes {
            let b = if span > 0.0 { (((l - self.min) / span) * bins as f64) as usize } else { 0 };
            counts[b.min(bins - 1)] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "iteration,lifetime_seconds,argmin_pe_row,argmin_pe_col")?;
        for (i, (l, (r, c))) in self.lifetimes.iter().zip(&self.argmin).enumerate() {
            writeln!(w, "{i},{l:e},{r},{c}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read_csv(scenario: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("iteration,lifetime_seconds,argmin_pe_row,argmin_pe_col") {
            return Err(Error::Format("lifetime CSV header mismatch".into()));
        }
        let bad = |n: usize| Error::Format(format!("lifetime CSV line {}", n + 2));
        let results = lines
            .enumerate()
            .map(|(n, line)| {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 4 || f[0].parse::<usize>().ok() != Some(n) {
                    return Err(bad(n));
                }
                Ok(SaLifetime {
                    seconds: f[1].parse().map_err(|_| bad(n))?,
                    row: f[2].parse().map_err(|_| bad(n))?,
                    col: f[3].parse().map_err(|_| bad(n))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LifetimeStats::new(scenario, results)
    }

    pub fn write_histogram_csv(&self, bins: usize, mut w: impl Write) -> Result<()> {
        let h = self.histogram(bins);
        writeln!(w, "bin_low,bin_high,count")?;
        for (i, c) in h.counts.iter().enumerate() {
            writeln!(w, "{:e},{:e},{c}", h.edges[i], h.edges[i + 1])?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One Monte Carlo iteration for several mitigations on shared variation
/// and workload draws.
fn iteration(
    base: &SaConfig,
    arms: &[Mitigation],
    sim: &Simulator,
    seed: u64,
    it: usize,
) -> Result<Vec<SaLifetime>> {
    let iseed = rng::derive(seed, &[it as u64]);
    let pv = pe_pv(base, sim.site_count(), iseed);
    let streams = pe_streams(base, iseed);
    let baseline: Vec<StressProfile> =
        streams.iter().map(|s| profile_stream(sim, s, &TransformPolicy::None, 0)).collect::<Result<_>>()?;
    let measured: Option<Vec<F2FSet>> = if arms.iter().any(Mitigation::needs_measurement) {
        Some(baseline.iter().zip(&pv).map(|(b, v)| Ok(circuit_lifetime(b, v, &base.aging)?.1)).collect::<Result<_>>()?)
    } else {
        None
    };
    arms.iter()
        .map(|arm| {
            let cfg = SaConfig { mitigation: arm.clone(), ..base.clone() };
            let mut best = SaLifetime { seconds: f64::INFINITY, row: 0, col: 0 };
            for pe in 0..cfg.pes() {
                let policy = arm.policy(iseed, pe, measured.as_ref().map(|m| &m[pe]))?;
                let own;
                let profile = if matches!(policy, TransformPolicy::None) {
                    &baseline[pe]
                } else {
                    own = profile_stream(sim, &streams[pe], &policy, 0)?;
                    &own
                };
                let l = pe_lifetime(&cfg, profile, &pv[pe])?;
                if l < best.seconds {
                    best = SaLifetime { seconds: l, row: pe / cfg.dim, col: pe % cfg.dim };
                }
            }
            Ok(best)
        })
        .collect()
}

/// Paired Monte Carlo: every arm sees the same variation and workload in
/// each iteration. Statistics are returned in arm order.
pub fn monte_carlo_paired(base: &SaConfig, arms: &[Mitigation], iterations: usize, seed: u64) -> Result<Vec<LifetimeStats>> {
    if iterations == 0 {
        return Err(Error::input("iterations must be at least 1"));
    }
    for arm in arms {
        SaConfig { mitigation: arm.clone(), ..base.clone() }.validate()?;
    }
    let sim = Simulator::new(&base.netlist)?;
    let per_iter: Vec<Vec<SaLifetime>> =
        (0..iterations).into_par_iter().map(|it| iteration(base, arms, &sim, seed, it)).collect::<Result<_>>()?;
    arms.iter()
        .enumerate()
        .map(|(a, arm)| LifetimeStats::new(arm.name(), per_iter.iter().map(|r| r[a]).collect()))
        .collect()
}

pub fn monte_carlo(cfg: &SaConfig, iterations: usize, seed: u64) -> Result<LifetimeStats> {
    Ok(monte_carlo_paired(cfg, std::slice::from_ref(&cfg.mitigation), iterations, seed)?.remove(0))
}

/// Minimum signed operand value, excluded from negation by every guard.
pub fn min_operand(width: usize) -> i64 {
    crate::logicsim::to_signed(min_signed(width), width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logicsim::{profile_alpha, WorkloadSpec};
    use crate::oracle::OracleTable;

    fn small(width: usize, dim: usize) -> SaConfig {
        SaConfig { dim, rounds: 2, inner: 32, ..SaConfig::generated(width, Arch::ArraySignedBw).unwrap() }
    }

    fn random_matrix(rows: usize, cols: usize, width: usize, seed: u64) -> Matrix {
        let mask = (1u64 << width) - 1;
        let data = (0..rows * cols)
            .map(|i| crate::logicsim::to_signed(rng::derive(seed, &[i as u64]) & mask, width))
            .collect();
        Matrix { rows, cols, data }
    }

    fn fresh(cfg: &SaConfig) -> Vec<PeState> {
        let sites = cfg.netlist.site_count();
        pe_states(cfg, vec![PvSample::zeros(sites); cfg.pes()], 1, None).unwrap()
    }

    #[test]
    fn identity_and_transparency() {
        let width = 8;
        let x = random_matrix(4, 4, width, 3);
        let o = Arc::new(OracleTable::from_fn(width, |v| (v.a ^ v.b) & 1 == 1));
        let mut none = small(width, 2);
        let mut states = fresh(&none);
        assert_eq!(matmul(&none, &x, &Matrix::identity(4), &mut states).unwrap(), x);
        let w = random_matrix(4, 5, width, 4);
        let reference = x.mul(&w).unwrap();
        let mut base = fresh(&none);
        assert_eq!(matmul(&none, &x, &w, &mut base).unwrap(), reference);
        none.mitigation = Mitigation::Oracle(o);
        let mut mitigated = fresh(&none);
        assert_eq!(matmul(&none, &x, &w, &mut mitigated).unwrap(), reference);
        let differs = base.iter().zip(&mitigated).any(|(a, b)| a.profile.zero_counts != b.profile.zero_counts);
        assert!(differs);
    }

    #[test]
    fn minimum_values_pass_through() {
        let width = 4;
        let m = min_operand(width);
        let x = Matrix::from_rows(&[vec![m, 3], vec![-1, m]]).unwrap();
        let w = Matrix::from_rows(&[vec![m, 1], vec![2, m]]).unwrap();
        let cfg = SaConfig { mitigation: Mitigation::Oracle(Arc::new(OracleTable::from_fn(width, |_| true))), ..small(width, 1) };
        let mut s = fresh(&cfg);
        assert_eq!(matmul(&cfg, &x, &w, &mut s).unwrap(), x.mul(&w).unwrap());
    }

    #[test]
    fn overflow_and_shape_errors() {
        let width = 8;
        let cfg = SaConfig { acc_bits: 16, ..small(width, 1) };
        let x = Matrix::from_rows(&[vec![-128; 4]]).unwrap();
        let w = Matrix::from_rows(&[vec![-128], vec![-128], vec![-128], vec![-128]]).unwrap();
        let mut s = fresh(&cfg);
        assert!(matches!(matmul(&cfg, &x, &w, &mut s), Err(Error::Config(_))));
        assert!(matmul(&cfg, &x, &x, &mut s).is_err());
        let big = Matrix::from_rows(&[vec![200]]).unwrap();
        assert!(matmul(&cfg, &big, &big, &mut s).is_err());
    }

    #[test]
    fn single_pe_matches_standalone_profile() {
        let cfg = small(4, 1);
        let mut s = fresh(&cfg);
        let mut pairs = Vec::new();
        for round in 0..cfg.rounds {
            let (x, w) = round_matrices(&cfg, 9, round);
            matmul(&cfg, &x, &w, &mut s).unwrap();
            let mask = 0xf;
            pairs.extend((0..cfg.inner).map(|k| InputPair::new(x.get(0, k) as u64 & mask, w.get(k, 0) as u64 & mask)));
        }
        let n = &cfg.netlist;
        let alone = profile_alpha(n, &WorkloadSpec::Pairs(pairs), &TransformPolicy::None).unwrap();
        assert_eq!(s[0].profile.zero_counts, alone.zero_counts);
        assert_eq!(pe_streams(&cfg, 9)[0].len(), cfg.pairs_per_pe());
    }

    #[test]
    fn streams_match_matmul() {
        let cfg = small(4, 2);
        let mut s = fresh(&cfg);
        for round in 0..cfg.rounds {
            let (x, w) = round_matrices(&cfg, 5, round);
            matmul(&cfg, &x, &w, &mut s).unwrap();
        }
        let sim = Simulator::new(&cfg.netlist).unwrap();
        for (pe, stream) in pe_streams(&cfg, 5).iter().enumerate() {
            let p = profile_stream(&sim, stream, &TransformPolicy::None, 0).unwrap();
            assert_eq!(p.zero_counts, s[pe].profile.zero_counts, "pe {pe}");
        }
    }

    #[test]
    fn lifetime_is_min_over_pes() {
        let cfg = small(4, 2);
        let n = cfg.netlist.clone();
        let sites = n.site_count();
        let mut pv = vec![PvSample::zeros(sites); 4];
        pv[3].deltas.iter_mut().for_each(|d| *d = 0.02);
        let mut s = pe_states(&cfg, pv, 0, None).unwrap();
        assert!(sa_lifetime(&cfg, &s).is_err());
        let stream = WorkloadSpec::uniform(1, 2048);
        let prof = profile_alpha(&n, &stream, &TransformPolicy::None).unwrap();
        for st in &mut s {
            st.profile = prof.clone();
        }
        let l = sa_lifetime(&cfg, &s).unwrap();
        assert_eq!((l.row, l.col), (1, 1));
        for st in &s {
            assert!(l.seconds <= circuit_lifetime(&st.profile, &st.pv, &cfg.aging).unwrap().0);
        }
        let same = circuit_lifetime(&prof, &PvSample::zeros(sites), &cfg.aging).unwrap().0;
        s[3].pv = PvSample::zeros(sites);
        assert_eq!(sa_lifetime(&cfg, &s).unwrap().seconds, same);
    }

    #[test]
    fn monte_carlo_determinism_and_point_mass() {
        let cfg = SaConfig { aging: AgingParams::no_pv(), ..small(4, 2) };
        let one = monte_carlo(&cfg, 1, 7).unwrap();
        assert_eq!((one.min, one.max, one.std), (one.mean, one.mean, 0.0));
        let cfg = small(4, 2);
        let a = monte_carlo(&cfg, 6, 3).unwrap();
        assert_eq!(a, monte_carlo(&cfg, 6, 3).unwrap());
        assert_eq!(a.histogram(4).counts.iter().sum::<usize>(), 6);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let back = LifetimeStats::read_csv(&a.scenario, std::str::from_utf8(&csv).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn paired_arms_share_draws() {
        let cfg = small(4, 2);
        let none = monte_carlo(&cfg, 3, 11).unwrap();
        let both = monte_carlo_paired(&cfg, &[Mitigation::Zbp, Mitigation::None], 3, 11).unwrap();
        assert_eq!(both[1].lifetimes, none.lifetimes);
        assert_eq!(both[0].scenario, "zbp");
    }
}
