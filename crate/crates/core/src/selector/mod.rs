// SPDX-License-Identifier: Apache-2.0

//! Selector modules: small Boolean functions of `k` operand bits that
//! approximate the oracle, plus ensembles keyed by F2F signature.
//!
//! Bit positions index the `2 * width`-bit concatenation with operand `a` in
//! the low half and `b` in the high half. Cover literals are `±(i + 1)` where
//! `i` indexes the selector's own `bits` list.

mod ensemble;
mod overhead;
pub mod qm;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::logicsim::{min_signed, Decider, InputPair};
use crate::oracle::OracleTable;
use crate::{Error, Result};

pub use ensemble::{build_ensemble, dispatch, Ensemble, EnsembleReport};
pub use overhead::{overhead, selector_netlist, OverheadReport};
use qm::Cube;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectorProvenance {
    /// Absolute phi coefficient per concatenated bit position.
    pub scores: Vec<f64>,
    pub oracle_iterations: usize,
    pub oracle_f2f: Vec<usize>,
    /// False if minimization fell back to a non-exact cover.
    pub exact_cover: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SelectorJson", into = "SelectorJson")]
pub struct SelectorFn {
    width: usize,
    bits: Vec<usize>,
    tt: Vec<bool>,
    cover: Vec<Cube>,
    guard: bool,
    pub provenance: SelectorProvenance,
}

#[derive(Serialize, Deserialize)]
struct SelectorJson {
    width: usize,
    bits: Vec<usize>,
    tt: String,
    cover: Vec<Vec<i32>>,
    guard: bool,
    #[serde(default)]
    provenance: SelectorProvenance,
}

impl From<SelectorFn> for SelectorJson {
    fn from(s: SelectorFn) -> Self {
        let k = s.k();
        SelectorJson {
            width: s.width,
            tt: tt_to_hex(&s.tt),
            cover: s.cover.iter().map(|c| c.to_literals(k)).collect(),
            bits: s.bits,
            guard: s.guard,
            provenance: s.provenance,
        }
    }
}

impl TryFrom<SelectorJson> for SelectorFn {
    type Error = Error;

    fn try_from(j: SelectorJson) -> Result<Self> {
        let k = j.bits.len();
        let bad = |m: String| Error::Format(format!("selector: {m}"));
        if !(2..=32).contains(&j.width) || k == 0 || k > 2 * j.width || k > 20 {
            return Err(bad(format!("{k} bits at width {}", j.width)));
        }
        if j.bits.iter().any(|&b| b >= 2 * j.width) || !j.bits.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad("bit positions must be distinct, ascending and in range".into()));
        }
        let tt = hex_to_tt(&j.tt, k).ok_or_else(|| bad("malformed truth table".into()))?;
        let cover = j
            .cover
            .iter()
            .map(|l| Cube::from_literals(l, k).ok_or_else(|| bad(format!("bad term {l:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let s = SelectorFn { width: j.width, bits: j.bits, tt, cover, guard: j.guard, provenance: j.provenance };
        if !s.cover_matches() {
            return Err(bad("cover is not equivalent to the truth table".into()));
        }
        Ok(s)
    }
}

/// Truth table as big-endian hex of `Σ tt[m] << m`.
fn tt_to_hex(tt: &[bool]) -> String {
    let digits = tt.len().div_ceil(4);
    (0..digits)
        .rev()
        .map(|d| {
            let nib = (0..4).fold(0u32, |acc, j| acc | (u32::from(*tt.get(4 * d + j).unwrap_or(&false)) << j));
            char::from_digit(nib, 16).unwrap()
        })
        .collect()
}

fn hex_to_tt(s: &str, k: usize) -> Option<Vec<bool>> {
    let n = 1usize << k;
    if s.len() != n.div_ceil(4) {
        return None;
    }
    let mut tt = vec![false; n];
    for (d, c) in s.chars().rev().enumerate() {
        let nib = c.to_digit(16)?;
        for j in 0..4 {
            let bit = nib >> j & 1 == 1;
            match tt.get_mut(4 * d + j) {
                Some(slot) => *slot = bit,
                None if bit => return None,
                None => {}
            }
        }
    }
    Some(tt)
}

impl Decider for SelectorFn {
    fn width(&self) -> usize {
        self.width
    }

    fn decide(&self, v: InputPair) -> bool {
        if self.guard && (v.a == min_signed(self.width) || v.b == min_signed(self.width)) {
            return false;
        }
        self.tt[self.pattern(v) as usize]
    }
}

impl SelectorFn {
    /// A selector with an explicit truth table over `bits`.
    pub fn from_table(width: usize, bits: Vec<usize>, tt: Vec<bool>) -> Result<Self> {
        let k = bits.len();
        if k == 0 || k > 2 * width || tt.len() != 1 << k {
            return Err(Error::input(format!("selector of {k} bits with {} table rows", tt.len())));
        }
        if bits.iter().any(|&b| b >= 2 * width) || !bits.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::input("bit positions must be distinct, ascending and in range"));
        }
        let cover = qm::minimize(&tt, k);
        Ok(SelectorFn {
            width,
            bits,
            tt,
            cover: cover.cubes,
            guard: true,
            provenance: SelectorProvenance { exact_cover: cover.exact, ..Default::default() },
        })
    }

    pub fn k(&self) -> usize {
        self.bits.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[usize] {
        &self.bits
    }

    pub fn truth_table(&self) -> &[bool] {
        &self.tt
    }

    pub fn cover(&self) -> Vec<Vec<i32>> {
        self.cover.iter().map(|c| c.to_literals(self.k())).collect()
    }

    pub(crate) fn cubes(&self) -> &[Cube] {
        &self.cover
    }

    pub fn is_constant_false(&self) -> bool {
        self.cover.is_empty()
    }

    /// The `k`-bit pattern a vector presents to the selector.
    pub fn pattern(&self, v: InputPair) -> u32 {
        let idx = v.index(self.width);
        self.bits.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | (((idx >> b) & 1) as u32) << i)
    }

    /// Exhaustive check that the cover reproduces the truth table.
    pub fn cover_matches(&self) -> bool {
        (0..self.tt.len() as u32).all(|m| qm::eval(&self.cover, m) == self.tt[m as usize])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BitScores {
    pub scores: Vec<f64>,
    /// The oracle was constant, so every score is 0.
    pub degenerate: bool,
}

/// |phi| between each concatenated input bit and the oracle label.
pub fn bit_scores(o: &OracleTable) -> Result<BitScores> {
    let entries = o.entries();
    if !o.is_dense() && entries.len() < 10_000 {
        return Err(Error::input(format!("sampled oracle has only {} entries", entries.len())));
    }
    let nbits = 2 * o.width();
    let total = entries.len() as f64;
    let positives = entries.iter().filter(|e| e.1).count() as f64;
    if positives == 0.0 || positives == total {
        return Ok(BitScores { scores: vec![0.0; nbits], degenerate: true });
    }
    let mut ones = vec![0f64; nbits];
    let mut ones_pos = vec![0f64; nbits];
    for &(v, d) in &entries {
        let idx = v.index(o.width());
        for b in 0..nbits {
            if idx >> b & 1 == 1 {
                ones[b] += 1.0;
                if d {
                    ones_pos[b] += 1.0;
                }
            }
        }
    }
    let scores = (0..nbits)
        .map(|b| {
            let n11 = ones_pos[b];
            let n10 = ones[b] - n11;
            let n01 = positives - n11;
            let n00 = total - ones[b] - n01;
            let denom = (ones[b] * (total - ones[b]) * positives * (total - positives)).sqrt();
            if denom == 0.0 {
                0.0
            } else {
                ((n11 * n00 - n10 * n01) / denom).abs()
            }
        })
        .collect();
    Ok(BitScores { scores, degenerate: false })
}

/// Top-`k` bits by score (ties to the lower index), majority truth table,
/// minimized cover, min-value guard.
pub fn synthesize(o: &OracleTable, k: usize) -> Result<SelectorFn> {
    let nbits = 2 * o.width();
    if k == 0 || k > nbits {
        return Err(Error::input(format!("k = {k} outside 1..={nbits}")));
    }
    if k > 20 {
        return Err(Error::input(format!("k = {k} exceeds the 20-bit truth-table limit")));
    }
    let scores = bit_scores(o)?;
    let mut order: Vec<usize> = (0..nbits).collect();
    order.sort_by(|&x, &y| scores.scores[y].total_cmp(&scores.scores[x]).then(x.cmp(&y)));
    let mut bits = order[..k].to_vec();
    bits.sort_unstable();

    let mut votes = vec![(0u64, 0u64); 1 << k];
    let probe = SelectorFn { width: o.width(), bits: bits.clone(), tt: vec![], cover: vec![], guard: false, provenance: Default::default() };
    for (v, d) in o.entries() {
        let slot = &mut votes[probe.pattern(v) as usize];
        if d {
            slot.0 += 1;
        } else {
            slot.1 += 1;
        }
    }
    let tt = votes.iter().map(|&(t, f)| t > f).collect();
    let mut s = SelectorFn::from_table(o.width(), bits, tt)?;
    s.provenance.scores = scores.scores;
    s.provenance.oracle_iterations = o.iterations();
    s.provenance.oracle_f2f = o.provenance.history.last().map(|f| f.sites.clone()).unwrap_or_default();
    Ok(s)
}

/// F1 of the selector's True decisions against the oracle over its domain.
pub fn f1(s: &SelectorFn, o: &OracleTable) -> Result<f64> {
    if s.width() != o.width() {
        return Err(Error::input(format!("selector width {} vs oracle width {}", s.width(), o.width())));
    }
    let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
    for (v, d) in o.entries() {
        match (s.decide(v), d) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip() {
        let tt: Vec<bool> = (0..32).map(|m| m % 3 == 0).collect();
        assert_eq!(hex_to_tt(&tt_to_hex(&tt), 5).unwrap(), tt);
        let small = vec![false, true];
        assert_eq!(tt_to_hex(&small), "2");
        assert_eq!(hex_to_tt("2", 1).unwrap(), small);
        assert!(hex_to_tt("4", 1).is_none());
    }

    #[test]
    fn label_equal_to_a_bit() {
        let o = OracleTable::from_fn_raw(4, |v| v.b & 1 == 1);
        let s = bit_scores(&o).unwrap();
        assert!((s.scores[4] - 1.0).abs() < 1e-12, "{:?}", s.scores);
        assert!(s.scores.iter().enumerate().all(|(j, &x)| j == 4 || x < 1e-12));
        let sm = synthesize(&o, 1).unwrap();
        assert_eq!(sm.bits(), &[4]);
        assert_eq!(sm.cover(), vec![vec![1]]);
    }

    #[test]
    fn degenerate_oracle() {
        let o = OracleTable::from_fn(3, |_| false);
        let s = bit_scores(&o).unwrap();
        assert!(s.degenerate);
        assert!(s.scores.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn f1_closed_forms() {
        let o = OracleTable::from_fn(4, |v| v.a >= 12);
        let never = SelectorFn::from_table(4, vec![0], vec![false, false]).unwrap();
        assert_eq!(f1(&never, &o).unwrap(), 0.0);
        let mut always = SelectorFn::from_table(4, vec![0], vec![true, true]).unwrap();
        always.guard = false;
        let q = o.true_count() as f64 / o.domain_len() as f64;
        assert!((f1(&always, &o).unwrap() - 2.0 * q / (1.0 + q)).abs() < 1e-12);
    }

    #[test]
    fn full_resolution_reproduces_oracle() {
        let o = OracleTable::from_fn(4, |v| (v.a * 7 + v.b * 3) % 5 < 2);
        let s = synthesize(&o, 8).unwrap();
        assert_eq!(f1(&s, &o).unwrap(), 1.0);
        for (v, d) in o.entries() {
            assert_eq!(s.decide(v), d);
        }
    }

    #[test]
    fn rejects_bad_k() {
        let o = OracleTable::from_fn(4, |v| v.a == 1);
        assert!(synthesize(&o, 0).is_err());
        assert!(synthesize(&o, 9).is_err());
    }

    #[test]
    fn json_round_trip() {
        let o = OracleTable::from_fn(4, |v| v.a & 1 == 1 && v.b & 2 == 0);
        let s = synthesize(&o, 4).unwrap();
        assert!(!s.is_constant_false());
        let text = s.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["guard"], serde_json::Value::Bool(true));
        assert!(v["tt"].is_string());
        assert_eq!(SelectorFn::from_json(&text).unwrap(), s);
        let broken = text.replace(&format!("\"{}\"", tt_to_hex(s.truth_table())), "\"ffff\"");
        assert!(SelectorFn::from_json(&broken).is_err());
    }
}
