// SPDX-License-Identifier: Apache-2.0

//! The ideal transform table and its iterative F2F construction.
//!
//! Construction loop:
//! 1. profile the multiplier without mitigation and take its F2F set `T`;
//! 2. mark input `I` iff the joint negation of `I` strictly lowers the
//!    number of stressed sites in `T` (min-value operands always unmarked);
//! 3. re-profile under the table and take the new F2F set `T'`;
//! 4. stop when `T' ⊆ T`, otherwise `T ← T ∪ T'` and go back to 2.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aging::{circuit_lifetime, AgingParams, F2FSet, PvSample};
use crate::logicsim::{
    lane_mask, min_signed, profile_sim, uniform_pair, Decider, InputPair, Simulator, TransformPolicy, WorkloadSpec,
};
use crate::netlist::Netlist;
use crate::rng;
use crate::{Error, Result};

/// Widths up to this are built over the full input domain.
pub const EXHAUSTIVE_MAX_WIDTH: usize = 8;
/// Domain size for sampled oracles.
pub const SAMPLED_DOMAIN: usize = 1 << 20;

const MAGIC: &[u8; 4] = b"MLOR";
const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
enum Table {
    /// One bit per input, indexed by `a | b << width`.
    Dense(Vec<u64>),
    /// Sorted `(index, decision)` pairs.
    Sparse(Vec<(u64, bool)>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// The F2F set used in each iteration's decision pass.
    pub history: Vec<F2FSet>,
    /// Circuit lifetime (seconds) re-profiled after each iteration.
    pub lifetimes: Vec<f64>,
    pub baseline_lifetime: f64,
    pub workload_seed: u64,
    pub domain_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleTable {
    width: usize,
    table: Table,
    pub provenance: Provenance,
}

fn is_guarded(v: InputPair, width: usize) -> bool {
    let m = min_signed(width);
    v.a == m || v.b == m
}

impl Decider for OracleTable {
    fn width(&self) -> usize {
        self.width
    }

    fn decide(&self, v: InputPair) -> bool {
        if is_guarded(v, self.width) {
            return false;
        }
        let idx = v.index(self.width);
        match &self.table {
            Table::Dense(bits) => (bits[(idx / 64) as usize] >> (idx % 64)) & 1 == 1,
            Table::Sparse(e) => e.binary_search_by_key(&idx, |&(k, _)| k).map(|i| e[i].1).unwrap_or(false),
        }
    }
}

impl OracleTable {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn iterations(&self) -> usize {
        self.provenance.history.len()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.table, Table::Dense(_))
    }

    /// The final F2F set the table protects.
    pub fn f2f(&self) -> &F2FSet {
        self.provenance.history.last().expect("oracle built with at least one iteration")
    }

    /// All `(input, decision)` entries of the table's domain, in index order.
    pub fn entries(&self) -> Vec<(InputPair, bool)> {
        match &self.table {
            Table::Dense(bits) => (0..1u64 << (2 * self.width))
                .map(|i| (InputPair::from_index(i, self.width), (bits[(i / 64) as usize] >> (i % 64)) & 1 == 1))
                .collect(),
            Table::Sparse(e) => e.iter().map(|&(i, d)| (InputPair::from_index(i, self.width), d)).collect(),
        }
    }

    pub fn domain_len(&self) -> usize {
        match &self.table {
            Table::Dense(_) => 1 << (2 * self.width),
            Table::Sparse(e) => e.len(),
        }
    }

    pub fn true_count(&self) -> usize {
        match &self.table {
            Table::Dense(bits) => bits.iter().map(|w| w.count_ones() as usize).sum(),
            Table::Sparse(e) => e.iter().filter(|x| x.1).count(),
        }
    }

    /// Build a table from explicit decisions over the full domain. The
    /// min-value guard still applies.
    pub fn from_fn(width: usize, f: impl Fn(InputPair) -> bool) -> Self {
        Self::from_fn_raw(width, |v| !is_guarded(v, width) && f(v))
    }

    /// As [`OracleTable::from_fn`] but storing `f` verbatim, guard included.
    /// Lookups through [`Decider::decide`] still refuse min-value operands.
    pub fn from_fn_raw(width: usize, f: impl Fn(InputPair) -> bool) -> Self {
        let n = 1u64 << (2 * width);
        let mut bits = vec![0u64; n.div_ceil(64) as usize];
        for i in 0..n {
            let v = InputPair::from_index(i, width);
            if f(v) {
                bits[(i / 64) as usize] |= 1 << (i % 64);
            }
        }
        OracleTable { width, table: Table::Dense(bits), provenance: Provenance::default() }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let p = &self.provenance;
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION, self.width as u8, u8::from(!self.is_dense())])?;
        w.write_all(&(p.history.len() as u32).to_le_bytes())?;
        w.write_all(&p.workload_seed.to_le_bytes())?;
        w.write_all(&p.domain_seed.to_le_bytes())?;
        w.write_all(&p.baseline_lifetime.to_le_bytes())?;
        for (set, life) in p.history.iter().zip(&p.lifetimes) {
            w.write_all(&life.to_le_bytes())?;
            w.write_all(&set.tolerance.to_le_bytes())?;
            w.write_all(&(set.sites.len() as u32).to_le_bytes())?;
            for &s in &set.sites {
                w.write_all(&(s as u32).to_le_bytes())?;
            }
        }
        match &self.table {
            Table::Dense(bits) => {
                let bytes = (1usize << (2 * self.width)).div_ceil(8);
                let raw: Vec<u8> = bits.iter().flat_map(|x| x.to_le_bytes()).take(bytes).collect();
                w.write_all(&raw)?;
            }
            Table::Sparse(e) => {
                w.write_all(&(e.len() as u64).to_le_bytes())?;
                for &(i, d) in e {
                    w.write_all(&i.to_le_bytes())?;
                    w.write_all(&[d as u8])?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("oracle table: {m}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut head = [0u8; 3];
        r.read_exact(&mut head)?;
        let [version, width, flags] = head;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let width = width as usize;
        if !(2..=32).contains(&width) {
            return Err(bad(&format!("width {width}")));
        }
        let iterations = read_u32(&mut r)? as usize;
        let workload_seed = read_u64(&mut r)?;
        let domain_seed = read_u64(&mut r)?;
        let baseline_lifetime = f64::from_bits(read_u64(&mut r)?);
        let mut history = Vec::with_capacity(iterations);
        let mut lifetimes = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            lifetimes.push(f64::from_bits(read_u64(&mut r)?));
            let tolerance = f64::from_bits(read_u64(&mut r)?);
            let len = read_u32(&mut r)? as usize;
            let sites = (0..len).map(|_| read_u32(&mut r).map(|s| s as usize)).collect::<Result<_>>()?;
            history.push(F2FSet { sites, tolerance });
        }
        let table = if flags & 1 == 0 {
            if width > 12 {
                return Err(bad("dense table wider than 12 bits"));
            }
            let bytes = (1usize << (2 * width)).div_ceil(8);
            let mut raw = vec![0u8; bytes.div_ceil(8) * 8];
            r.read_exact(&mut raw[..bytes])?;
            Table::Dense(raw.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
        } else {
            let len = read_u64(&mut r)? as usize;
            let mut e = Vec::with_capacity(len.min(1 << 24));
            for _ in 0..len {
                let i = read_u64(&mut r)?;
                let mut d = [0u8];
                r.read_exact(&mut d)?;
                e.push((i, d[0] != 0));
            }
            if !e.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(bad("sparse entries not sorted"));
            }
            Table::Sparse(e)
        };
        let provenance = Provenance { history, lifetimes, baseline_lifetime, workload_seed, domain_seed };
        Ok(OracleTable { width, table, provenance })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Number of sites in `sites` that are stressed by `v`.
pub fn static_stress(n: &Netlist, sites: &F2FSet, v: InputPair) -> Result<usize> {
    let sim = Simulator::new(n)?;
    sim.check(&v)?;
    if let Some(&s) = sites.sites.iter().find(|&&s| s >= sim.site_count()) {
        return Err(Error::input(format!("site {s} not in netlist")));
    }
    Ok(StressCounter::new(&sim, sites).counts(&[v])[0] as usize)
}

/// Bulk per-vector stress counts over a fixed site set.
pub(crate) struct StressCounter<'a> {
    sim: &'a Simulator,
    nets: Vec<u32>,
}

impl<'a> StressCounter<'a> {
    pub(crate) fn new(sim: &'a Simulator, sites: &F2FSet) -> Self {
        let nets = sites.sites.iter().map(|&s| sim.site_nets()[s]).collect();
        StressCounter { sim, nets }
    }

    /// Stressed-site count for each of up to 64 vectors.
    pub(crate) fn counts(&self, vectors: &[InputPair]) -> [u16; 64] {
        let mut block = self.sim.new_block();
        self.sim.eval_block(vectors, &mut block);
        let mask = lane_mask(vectors.len());
        let mut out = [0u16; 64];
        for &net in &self.nets {
            let mut zeros = !block.nets[net as usize] & mask;
            while zeros != 0 {
                out[zeros.trailing_zeros() as usize] += 1;
                zeros &= zeros - 1;
            }
        }
        out
    }
}

/// Decisions for every domain index under the F2F set `sites`.
fn decide_all(sim: &Simulator, sites: &F2FSet, domain: &[u64]) -> Vec<bool> {
    let width = sim.width();
    let counter = StressCounter::new(sim, sites);
    domain
        .par_chunks(64)
        .flat_map_iter(|chunk| {
            let plain: Vec<InputPair> = chunk.iter().map(|&i| InputPair::from_index(i, width)).collect();
            let neg: Vec<InputPair> = plain.iter().map(|v| v.negated(width)).collect();
            let cp = counter.counts(&plain);
            let cn = counter.counts(&neg);
            plain
                .iter()
                .enumerate()
                .map(|(l, &v)| !is_guarded(v, width) && cn[l] < cp[l])
                .collect::<Vec<_>>()
        })
        .collect()
}

fn workload_seed(w: &WorkloadSpec) -> u64 {
    match w {
        WorkloadSpec::Uniform { seed, .. } => *seed,
        _ => 0,
    }
}

/// Build the oracle for a signed multiplier.
pub fn build_oracle(n: &Netlist, p: &AgingParams, pv: &PvSample, w: &WorkloadSpec) -> Result<OracleTable> {
    if !n.arch.is_signed_multiplier() {
        return Err(Error::config(format!(
            "oracle requires a signed multiplier, got `{}`: joint negation would change its outputs",
            n.arch
        )));
    }
    p.validate()?;
    let sim = Simulator::new(n)?;
    let width = sim.width();
    let baseline = profile_sim(&sim, w, &TransformPolicy::None)?;
    let (baseline_lifetime, mut f2f) = circuit_lifetime(&baseline, pv, p)?;

    let wseed = workload_seed(w);
    let domain_seed = rng::derive(wseed, &[0x0d0a_1e55]);
    let (domain, dense) = if width <= EXHAUSTIVE_MAX_WIDTH {
        ((0..1u64 << (2 * width)).collect::<Vec<_>>(), true)
    } else {
        let mut d: Vec<u64> =
            (0..SAMPLED_DOMAIN as u64).map(|i| uniform_pair(domain_seed, i, width).index(width)).collect();
        d.sort_unstable();
        d.dedup();
        (d, false)
    };

    let mut provenance = Provenance {
        baseline_lifetime,
        workload_seed: wseed,
        domain_seed: if dense { 0 } else { domain_seed },
        ..Provenance::default()
    };
    loop {
        let decisions = decide_all(&sim, &f2f, &domain);
        let table = if dense {
            let mut bits = vec![0u64; domain.len().div_ceil(64)];
            for (i, &d) in decisions.iter().enumerate() {
                bits[i / 64] |= (d as u64) << (i % 64);
            }
            Table::Dense(bits)
        } else {
            Table::Sparse(domain.iter().copied().zip(decisions).collect())
        };
        provenance.history.push(f2f.clone());
        let oracle = Arc::new(OracleTable { width, table, provenance: Provenance::default() });
        let profile = profile_sim(&sim, w, &TransformPolicy::Oracle(oracle.clone()))?;
        let (life, next) = circuit_lifetime(&profile, pv, p)?;
        provenance.lifetimes.push(life);
        if next.is_subset(&f2f) || provenance.history.len() >= sim.site_count() {
            let mut oracle = Arc::try_unwrap(oracle).unwrap_or_else(|a| (*a).clone());
            oracle.provenance = provenance;
            return Ok(oracle);
        }
        f2f = f2f.union(&next);
    }
}

/// Apply a decider: joint negation when it says so, otherwise unchanged.
pub fn apply(d: &dyn Decider, v: InputPair) -> InputPair {
    if d.decide(v) {
        v.negated(d.width())
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logicsim::stressed_sites;
    use crate::netlist::{build_multiplier, Arch};

    #[test]
    fn static_stress_bounds() {
        let n = build_multiplier(4, Arch::ArraySignedBw).unwrap();
        let all = F2FSet::new((0..n.site_count()).collect(), 0.0);
        for i in [0u64, 17, 200, 255] {
            let v = InputPair::from_index(i, 4);
            assert_eq!(static_stress(&n, &F2FSet::default(), v).unwrap(), 0);
            assert_eq!(static_stress(&n, &all, v).unwrap(), stressed_sites(&n, v).unwrap().len());
        }
    }

    #[test]
    fn apply_examples() {
        let never = OracleTable::from_fn(8, |_| false);
        let always = OracleTable::from_fn(8, |_| true);
        let v = InputPair::new(100, 1);
        assert_eq!(apply(&never, v), v);
        assert_eq!(apply(&always, v), InputPair::new(156, 255));
        assert_eq!(apply(&always, InputPair::new(128, 3)), InputPair::new(128, 3));
    }

    #[test]
    fn rejects_unsigned() {
        let n = build_multiplier(4, Arch::ArrayUnsigned).unwrap();
        let p = AgingParams::no_pv();
        let r = build_oracle(&n, &p, &PvSample::zeros(n.site_count()), &WorkloadSpec::Exhaustive);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn width4_oracle_basics() {
        let n = build_multiplier(4, Arch::ArraySignedBw).unwrap();
        let p = AgingParams::no_pv();
        let o = build_oracle(&n, &p, &PvSample::zeros(n.site_count()), &WorkloadSpec::Exhaustive).unwrap();
        assert!(!o.decide(InputPair::new(0, 0)));
        assert!(o.iterations() <= n.site_count());
        for (v, d) in o.entries() {
            if v.a == 8 || v.b == 8 {
                assert!(!d);
            }
        }
    }

    #[test]
    fn binary_round_trip() {
        let n = build_multiplier(4, Arch::WallaceSigned).unwrap();
        let p = AgingParams::no_pv();
        let o = build_oracle(&n, &p, &PvSample::zeros(n.site_count()), &WorkloadSpec::uniform(3, 5000)).unwrap();
        let mut buf = Vec::new();
        o.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MLOR");
        assert_eq!(OracleTable::read_from(&buf[..]).unwrap(), o);
        assert!(OracleTable::read_from(&b"XXXX"[..]).is_err());

        let sparse = OracleTable {
            width: 10,
            table: Table::Sparse(vec![(3, true), (90, false), (1 << 19, true)]),
            provenance: Provenance::default(),
        };
        let mut buf = Vec::new();
        sparse.write_to(&mut buf).unwrap();
        let back = OracleTable::read_from(&buf[..]).unwrap();
        assert_eq!(back, sparse);
        assert!(back.decide(InputPair::from_index(3, 10)));
        assert!(!back.decide(InputPair::from_index(4, 10)));
    }
}
