// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::aging::{circuit_lifetime, AgingParams, F2FSet, PvSample};
use crate::logicsim::{profile_sim, Simulator, TransformPolicy, WorkloadSpec};
use crate::netlist::Netlist;
use crate::oracle::build_oracle;
use crate::{Error, Result};

use super::{synthesize, SelectorFn};

pub const MAX_ENSEMBLE: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub signature: F2FSet,
    /// Scenarios whose no-mitigation F2F set mapped to this member.
    pub frequency: usize,
    pub selector: SelectorFn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    width: usize,
    members: Vec<Member>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub requested: usize,
    pub scenarios: usize,
    pub distinct_signatures: usize,
    /// Signatures whose selector duplicated an earlier member's and were
    /// merged into it.
    pub merged: usize,
    /// Fewer members than requested.
    pub short: bool,
}

impl Ensemble {
    pub fn new(members: Vec<Member>) -> Result<Self> {
        let width = members.first().ok_or_else(|| Error::input("empty ensemble"))?.selector.width();
        if members.len() > MAX_ENSEMBLE {
            return Err(Error::input(format!("ensemble of {} exceeds {MAX_ENSEMBLE}", members.len())));
        }
        if members.iter().any(|m| m.selector.width() != width) {
            return Err(Error::input("ensemble members differ in width"));
        }
        for (i, m) in members.iter().enumerate() {
            if members[..i].iter().any(|o| o.signature.sites == m.signature.sites) {
                return Err(Error::input("duplicate ensemble signature"));
            }
        }
        Ok(Ensemble { width, members })
    }

    pub fn single(selector: SelectorFn, signature: F2FSet) -> Self {
        Ensemble { width: selector.width(), members: vec![Member { signature, frequency: 1, selector }] }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &SelectorFn {
        &self.members[i].selector
    }

    /// The first `p` members as an ensemble of their own.
    pub fn prefix(&self, p: usize) -> Self {
        Ensemble { width: self.width, members: self.members[..p.clamp(1, self.len())].to_vec() }
    }

    /// Member with maximum Jaccard similarity to `measured`; ties go to the
    /// earlier member.
    pub fn dispatch_index(&self, measured: &F2FSet) -> usize {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (i, m) in self.members.iter().enumerate() {
            let s = m.signature.jaccard(measured);
            if s > best_sim {
                best_sim = s;
                best = i;
            }
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: Ensemble = serde_json::from_str(s)?;
        Ensemble::new(e.members)
    }
}

pub fn dispatch<'a>(e: &'a Ensemble, measured: &F2FSet) -> &'a SelectorFn {
    e.member(e.dispatch_index(measured))
}

/// Cluster PV scenarios by no-mitigation F2F set and build one selector per
/// frequent signature. Signatures whose selector duplicates an earlier
/// member's are folded into that member's signature.
pub fn build_ensemble(
    n: &Netlist,
    p: &AgingParams,
    scenarios: &[PvSample],
    size: usize,
    k: usize,
    w: &WorkloadSpec,
) -> Result<(Ensemble, EnsembleReport)> {
    if size == 0 || size > MAX_ENSEMBLE {
        return Err(Error::input(format!("ensemble size {size} outside 1..={MAX_ENSEMBLE}")));
    }
    if scenarios.is_empty() {
        return Err(Error::input("no PV scenarios"));
    }
    let sim = Simulator::new(n)?;
    let baseline = profile_sim(&sim, w, &TransformPolicy::None)?;
    let mut clusters: Vec<(F2FSet, usize, usize)> = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    for (i, pv) in scenarios.iter().enumerate() {
        let (_, f2f) = circuit_lifetime(&baseline, pv, p)?;
        match index.get(&f2f.sites) {
            Some(&c) => clusters[c].1 += 1,
            None => {
                index.insert(f2f.sites.clone(), clusters.len());
                clusters.push((f2f, 1, i));
            }
        }
    }
    let distinct = clusters.len();
    // Most frequent first; ties keep first-seen order.
    clusters.sort_by_key(|c| (std::cmp::Reverse(c.1), c.2));

    let mut members: Vec<Member> = Vec::new();
    let mut merged = 0;
    for (signature, frequency, first) in clusters {
        let oracle = build_oracle(n, p, &scenarios[first], w)?;
        let selector = synthesize(&oracle, k)?;
        let same = members
            .iter()
            .position(|m| m.selector.bits() == selector.bits() && m.selector.truth_table() == selector.truth_table());
        match same {
            Some(i) => {
                let m = &mut members[i];
                m.signature = m.signature.union(&signature);
                m.frequency += frequency;
                merged += 1;
            }
            None if members.len() < size => members.push(Member { signature, frequency, selector }),
            None => break,
        }
    }
    let report = EnsembleReport { requested: size, scenarios: scenarios.len(), distinct_signatures: distinct, merged, short: members.len() < size };
    Ok((Ensemble::new(members)?, report))
}
