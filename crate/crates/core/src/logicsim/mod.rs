// SPDX-License-Identifier: Apache-2.0

//! Netlist evaluation and per-PMOS stress accounting.
//!
//! A PMOS is stressed while its gate input is logic 0. Stress is counted per
//! applied vector: the α of a site is the fraction of vectors for which the
//! net driving its pin evaluates to 0.

mod policy;
mod sim;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::netlist::Netlist;
use crate::rng;
use crate::{Error, Result};

pub use policy::{Decider, Transform, TransformPolicy};
pub use sim::{lane_mask, Block, Simulator};

/// Default seconds per applied vector (a 100 MHz-class clock).
pub const DEFAULT_T_DATA: f64 = 10e-9;

/// Two operand bit patterns (plus a carry-in, used only by adders).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct InputPair {
    pub a: u64,
    pub b: u64,
    pub cin: bool,
}

impl InputPair {
    pub fn new(a: u64, b: u64) -> Self {
        InputPair { a, b, cin: false }
    }

    /// Encode signed operands as `width`-bit two's-complement patterns.
    pub fn signed(a: i64, b: i64, width: usize) -> Self {
        let m = lane_mask(width);
        InputPair::new(a as u64 & m, b as u64 & m)
    }

    pub fn negated(self, width: usize) -> Self {
        InputPair { a: negate(self.a, width), b: negate(self.b, width), cin: self.cin }
    }

    pub fn complemented(self, width: usize) -> Self {
        let m = lane_mask(width);
        InputPair { a: !self.a & m, b: !self.b & m, cin: !self.cin }
    }

    /// Index into a `2 * width`-bit domain: `a` in the low bits, `b` above.
    pub fn index(self, width: usize) -> u64 {
        self.a | (self.b << width)
    }

    pub fn from_index(index: u64, width: usize) -> Self {
        let m = lane_mask(width);
        InputPair::new(index & m, (index >> width) & m)
    }
}

/// Modular two's-complement negation of a `width`-bit pattern.
pub fn negate(x: u64, width: usize) -> u64 {
    x.wrapping_neg() & lane_mask(width)
}

pub fn min_signed(width: usize) -> u64 {
    1u64 << (width - 1)
}

/// Interpret a `width`-bit pattern as two's complement.
pub fn to_signed(x: u64, width: usize) -> i64 {
    let shift = 64 - width as u32;
    ((x << shift) as i64) >> shift
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadSpec {
    /// `count` vectors drawn uniformly (operands and carry-in).
    Uniform { seed: u64, count: usize },
    /// Every `(a, b)` pair in index order, carry-in low.
    Exhaustive,
    Pairs(Vec<InputPair>),
}

impl WorkloadSpec {
    pub fn uniform(seed: u64, count: usize) -> Self {
        WorkloadSpec::Uniform { seed, count }
    }

    pub fn len(&self, width: usize) -> usize {
        match self {
            WorkloadSpec::Uniform { count, .. } => *count,
            WorkloadSpec::Exhaustive => 1usize << (2 * width),
            WorkloadSpec::Pairs(p) => p.len(),
        }
    }

    pub fn is_empty(&self, width: usize) -> bool {
        self.len(width) == 0
    }

    pub fn pair(&self, index: usize, width: usize) -> InputPair {
        match self {
            WorkloadSpec::Uniform { seed, .. } => uniform_pair(*seed, index as u64, width),
            WorkloadSpec::Exhaustive => InputPair::from_index(index as u64, width),
            WorkloadSpec::Pairs(p) => p[index],
        }
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        if self.is_empty(width) {
            return Err(Error::input("empty workload"));
        }
        if matches!(self, WorkloadSpec::Exhaustive) && width > 12 {
            return Err(Error::input(format!("exhaustive workload at width {width} is too large")));
        }
        Ok(())
    }
}

/// Counter-based uniform vector: the same `(seed, index)` always yields the
/// same pair, whatever the shard layout.
pub fn uniform_pair(seed: u64, index: u64, width: usize) -> InputPair {
    let m = lane_mask(width);
    let h1 = rng::derive(seed, &[index]);
    let h2 = rng::mix64(h1);
    InputPair { a: h1 & m, b: h2 & m, cin: (h2 >> 63) == 1 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StressProfile {
    pub zero_counts: Vec<u64>,
    pub vectors: u64,
    pub t_data: f64,
}

impl StressProfile {
    pub fn empty(sites: usize) -> Self {
        StressProfile { zero_counts: vec![0; sites], vectors: 0, t_data: DEFAULT_T_DATA }
    }

    pub fn site_count(&self) -> usize {
        self.zero_counts.len()
    }

    pub fn alpha(&self, site: usize) -> f64 {
        assert!(self.vectors > 0, "alpha read before any vector was applied");
        self.zero_counts[site] as f64 / self.vectors as f64
    }

    pub fn alphas(&self) -> Vec<f64> {
        (0..self.site_count()).map(|s| self.alpha(s)).collect()
    }

    pub fn max_alpha(&self) -> f64 {
        self.alphas().into_iter().fold(0.0, f64::max)
    }

    /// Mean over sites of `|α - 0.5|`.
    pub fn mean_imbalance(&self) -> f64 {
        let a = self.alphas();
        a.iter().map(|x| (x - 0.5).abs()).sum::<f64>() / a.len() as f64
    }

    pub fn alpha_std(&self) -> f64 {
        let a = self.alphas();
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    }

    pub fn merge(&mut self, other: &StressProfile) {
        assert_eq!(self.site_count(), other.site_count());
        for (x, y) in self.zero_counts.iter_mut().zip(&other.zero_counts) {
            *x += y;
        }
        self.vectors += other.vectors;
    }

    pub fn write_csv(&self, netlist: &Netlist, mut w: impl Write) -> Result<()> {
        writeln!(w, "site_index,gate_id,pin,alpha,zero_count,vectors")?;
        for site in netlist.pmos_sites() {
            writeln!(
                w,
                "{},{},{},{:.9},{},{}",
                site.index,
                netlist.gates[site.gate].id,
                site.pin,
                self.alpha(site.index),
                self.zero_counts[site.index],
                self.vectors
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, netlist: &Netlist, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(netlist, &mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Read the CSV written by [`StressProfile::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty profile".into()))?;
        if header.trim() != "site_index,gate_id,pin,alpha,zero_count,vectors" {
            return Err(Error::Format(format!("unexpected profile header `{header}`")));
        }
        let mut zero_counts = Vec::new();
        let mut vectors = 0;
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Format(format!("profile line {}: `{line}`", lineno + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 || f[0].parse::<usize>().ok() != Some(zero_counts.len()) {
                return Err(bad());
            }
            zero_counts.push(f[4].parse().map_err(|_| bad())?);
            vectors = f[5].parse().map_err(|_| bad())?;
        }
        Ok(StressProfile { zero_counts, vectors, t_data: DEFAULT_T_DATA })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub nets: Vec<bool>,
    pub value: i128,
}

pub fn evaluate(n: &Netlist, v: InputPair) -> Result<Evaluation> {
    let sim = Simulator::new(n)?;
    sim.check(&v)?;
    let mut block = sim.new_block();
    sim.eval_block(&[v], &mut block);
    Ok(Evaluation {
        nets: block.nets.iter().map(|w| w & 1 == 1).collect(),
        value: sim.output_value(&block, 0),
    })
}

/// Sites whose gate input is logic 0 for this vector.
pub fn stressed_sites(n: &Netlist, v: InputPair) -> Result<Vec<usize>> {
    let sim = Simulator::new(n)?;
    sim.check(&v)?;
    let mut block = sim.new_block();
    sim.eval_block(&[v], &mut block);
    Ok(sim
        .site_nets()
        .iter()
        .enumerate()
        .filter(|(_, &net)| block.nets[net as usize] & 1 == 0)
        .map(|(s, _)| s)
        .collect())
}

const SHARD: usize = 64 * 64;

/// Accumulate per-net zero counts for vectors `range` of a workload.
fn zero_counts_for(
    sim: &Simulator,
    w: &WorkloadSpec,
    policy: &TransformPolicy,
    range: std::ops::Range<usize>,
) -> Result<Vec<u64>> {
    count_zeros(sim, |i| w.pair(i, sim.width()), policy, range, 0)
}

/// Zero counts for `pair(i)`, `i` in `range`, with the policy seeing vector
/// index `first_index + i`.
fn count_zeros(
    sim: &Simulator,
    pair: impl Fn(usize) -> InputPair,
    policy: &TransformPolicy,
    range: std::ops::Range<usize>,
    first_index: u64,
) -> Result<Vec<u64>> {
    let width = sim.width();
    let mut counts = vec![0u64; sim.net_count()];
    let mut block = sim.new_block();
    let mut buf = Vec::with_capacity(64);
    let mut start = range.start;
    while start < range.end {
        let end = (start + 64).min(range.end);
        buf.clear();
        for i in start..end {
            let v = pair(i);
            sim.check(&v)?;
            buf.push(policy.apply(v, first_index + i as u64, width).0);
        }
        sim.eval_block(&buf, &mut block);
        let mask = block.mask();
        for (c, &word) in counts.iter_mut().zip(&block.nets) {
            *c += (!word & mask).count_ones() as u64;
        }
        start = end;
    }
    Ok(counts)
}

/// Profile a prepared simulator. Shards run in parallel; the merged counts
/// are identical to a single pass.
pub fn profile_sim(sim: &Simulator, w: &WorkloadSpec, policy: &TransformPolicy) -> Result<StressProfile> {
    let width = sim.width();
    w.validate(width)?;
    policy.check_width(width)?;
    let total = w.len(width);
    let shards: Vec<_> = (0..total).step_by(SHARD).map(|s| s..(s + SHARD).min(total)).collect();
    let parts: Vec<Vec<u64>> = if shards.len() == 1 {
        vec![zero_counts_for(sim, w, policy, shards[0].clone())?]
    } else {
        shards
            .into_par_iter()
            .map(|r| zero_counts_for(sim, w, policy, r))
            .collect::<Result<_>>()?
    };
    let mut net_zero = vec![0u64; sim.net_count()];
    for p in parts {
        for (x, y) in net_zero.iter_mut().zip(p) {
            *x += y;
        }
    }
    Ok(StressProfile {
        zero_counts: sim.site_nets().iter().map(|&n| net_zero[n as usize]).collect(),
        vectors: total as u64,
        t_data: DEFAULT_T_DATA,
    })
}

/// Profile an explicit pair stream on one thread, numbering vectors from
/// `first_index` so that a stream can be continued across calls.
pub fn profile_stream(
    sim: &Simulator,
    pairs: &[InputPair],
    policy: &TransformPolicy,
    first_index: u64,
) -> Result<StressProfile> {
    policy.check_width(sim.width())?;
    let net_zero = count_zeros(sim, |i| pairs[i], policy, 0..pairs.len(), first_index)?;
    Ok(StressProfile {
        zero_counts: sim.site_nets().iter().map(|&n| net_zero[n as usize]).collect(),
        vectors: pairs.len() as u64,
        t_data: DEFAULT_T_DATA,
    })
}

pub fn profile_alpha(n: &Netlist, w: &WorkloadSpec, policy: &TransformPolicy) -> Result<StressProfile> {
    profile_sim(&Simulator::new(n)?, w, policy)
}
