// SPDX-License-Identifier: Apache-2.0

//! Reference mitigations: random and alternating complementing, and supply
//! voltage compensation.

use serde::{Deserialize, Serialize};

use crate::aging::{delta_vth, AgingParams, PvSample};
use crate::logicsim::{StressProfile, TransformPolicy};
use crate::{Error, Result};

/// Complement both operands of each vector with probability `p`.
pub fn trng_policy(p: f64, seed: u64) -> Result<TransformPolicy> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("trng probability {p} outside [0, 1]")));
    }
    Ok(TransformPolicy::Trng { p, seed })
}

/// Complement every odd-indexed vector.
pub fn zbp_policy() -> TransformPolicy {
    TransformPolicy::Zbp
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DvfsParams {
    pub v_step: f64,
    pub v_max: f64,
    /// Slope of kv against `vdd / vdd_nominal`: `kv(v) = kv (1 + s (v / vdd − 1))`.
    pub kv_voltage_scaling: f64,
}

impl Default for DvfsParams {
    fn default() -> Self {
        DvfsParams { v_step: 0.01, v_max: 0.9, kv_voltage_scaling: 1.0 }
    }
}

impl DvfsParams {
    pub fn validate(&self, p: &AgingParams) -> Result<()> {
        if self.v_step.is_nan() || self.v_step <= 0.0 {
            return Err(Error::config("dvfs v_step must be positive"));
        }
        if self.v_max.is_nan() || self.v_max < p.vdd {
            return Err(Error::config(format!("dvfs v_max {} below nominal vdd {}", self.v_max, p.vdd)));
        }
        if self.kv_voltage_scaling.is_nan() || self.kv_voltage_scaling < 0.0 {
            return Err(Error::config("dvfs kv_voltage_scaling must be non-negative"));
        }
        Ok(())
    }

    /// Supply levels from nominal to `v_max`, the last one clamped.
    pub fn levels(&self, vdd: f64) -> Vec<f64> {
        let steps = ((self.v_max - vdd) / self.v_step + 1e-9).floor() as usize;
        let mut v: Vec<f64> = (0..=steps).map(|j| vdd + j as f64 * self.v_step).collect();
        if self.v_max - v[steps] > 1e-12 {
            v.push(self.v_max);
        }
        v
    }

    pub fn kv_at(&self, v: f64, p: &AgingParams) -> f64 {
        p.kv * (1.0 + self.kv_voltage_scaling * (v / p.vdd - 1.0))
    }
}

/// Per-site `(α^λ, failure shift at nominal supply)` for stressed sites.
fn stressed(profile: &StressProfile, pv: &PvSample, p: &AgingParams) -> Result<Vec<(f64, f64)>> {
    p.validate()?;
    if profile.site_count() == 0 || profile.vectors == 0 {
        return Err(Error::input("empty stress profile"));
    }
    if pv.len() != profile.site_count() {
        return Err(Error::input(format!("pv sample covers {} sites, profile {}", pv.len(), profile.site_count())));
    }
    (0..profile.site_count())
        .filter(|&s| profile.alpha(s) > 0.0)
        .map(|s| Ok((profile.alpha(s).powf(p.lambda), p.failure_shift(p.vth_nominal + pv.deltas[s])?)))
        .collect()
}

/// Lifetime when the supply is raised by `v_step` each time the weakest
/// device's ON current falls to the failure fraction of its unaged nominal
/// value, until `v_max` can no longer hold it.
///
/// Raising the supply by `Δv` raises every device's tolerable shift by `Δv`.
/// The shift of site `i` is `A(kv) α_i^λ G(t)`, so every site shares one
/// effective age: a supply change rescales `G` by the ratio of amplitudes
/// and aging resumes from there. Each level then ends in closed form.
pub fn dvfs_lifetime(profile: &StressProfile, pv: &PvSample, p: &AgingParams, d: &DvfsParams) -> Result<f64> {
    d.validate(p)?;
    let sites = stressed(profile, pv, p)?;
    if sites.is_empty() {
        return Ok(f64::INFINITY);
    }
    let mut t = 0.0;
    let mut g = 0.0;
    let mut prev_amp: Option<f64> = None;
    for v in d.levels(p.vdd) {
        let amp = p.amplitude(d.kv_at(v, p));
        if let Some(a0) = prev_amp {
            g *= a0 / amp;
        }
        prev_amp = Some(amp);
        let headroom = v - p.vdd;
        let end = sites.iter().map(|&(a, limit)| (limit + headroom) / (amp * a)).fold(f64::INFINITY, f64::min);
        if g < end {
            let dt = p.time_for_factor(end) - p.time_for_factor(g);
            if !dt.is_finite() {
                return Ok(f64::INFINITY);
            }
            t += dt;
            g = end;
        }
    }
    Ok(t)
}

/// Reference for [`dvfs_lifetime`]: steps time on a geometric grid
/// (`t_{k+1} = growth · t_k` from 1 s) and checks every site's shift
/// explicitly at each step. The result is the first grid time at which the
/// highest level fails, so it overshoots by at most a factor `growth`.
pub fn dvfs_lifetime_stepped(
    profile: &StressProfile,
    pv: &PvSample,
    p: &AgingParams,
    d: &DvfsParams,
    growth: f64,
) -> Result<f64> {
    d.validate(p)?;
    if growth.is_nan() || growth <= 1.0 {
        return Err(Error::input("grid growth must exceed 1"));
    }
    stressed(profile, pv, p)?;
    let alphas = profile.alphas();
    let levels = d.levels(p.vdd);
    let at = |j: usize| AgingParams { kv: d.kv_at(levels[j], p), ..p.clone() };
    let fails = |q: &AgingParams, headroom: f64, age: f64| -> Result<bool> {
        for (s, &a) in alphas.iter().enumerate() {
            let limit = p.failure_shift(p.vth_nominal + pv.deltas[s])? + headroom;
            if delta_vth(a, age, q)? >= limit {
                return Ok(true);
            }
        }
        Ok(false)
    };
    let mut level = 0;
    let mut q = at(0);
    let (mut t, mut age) = (0.0, 0.0);
    let mut next = 1.0;
    while next < 1e40 {
        age += next - t;
        t = next;
        while fails(&q, levels[level] - p.vdd, age)? {
            if level + 1 == levels.len() {
                return Ok(t);
            }
            let from = p.amplitude(q.kv);
            level += 1;
            q = at(level);
            age = p.time_for_factor(p.time_factor(age) * from / p.amplitude(q.kv));
        }
        next = t * growth;
    }
    Ok(f64::INFINITY)
}
