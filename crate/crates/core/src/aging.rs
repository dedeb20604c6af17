// SPDX-License-Identifier: Apache-2.0

//! NBTI threshold shift, process variation, ON-current degradation and the
//! lifetime solver.
//!
//! Two shift laws are available. The default power law is
//! `ΔVth(t) = kv · (α t / 1 s)^λ`. The long-term reaction-diffusion form is
//! `ΔVth(t) = (kv² α T_data)^λ · (h(t) − h(0))` with
//! `h(t) = (1 − β(t)^(1/2λ))^(−2λ)` and `β(t) = 1 − c / (d + √t)`; the
//! `h(0)` offset makes the shift vanish at `t = 0`.
//!
//! The ON current follows an alpha-power law,
//! `I(t)/I(0) = ((Vdd − Vth(t)) / (Vdd − Vth(0)))^γ`, and a site fails once
//! that ratio drops to `failure_fraction`. Each site's reference is its own
//! unaged (PV-shifted) threshold.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logicsim::{StressProfile, DEFAULT_T_DATA};
use crate::rng;
use crate::{Error, Result};

/// Ten Julian years in seconds.
pub const TEN_YEARS: f64 = 10.0 * 365.25 * 86_400.0;

/// kv giving a 50 mV shift after ten years at α = 0.5 for time exponent `lambda`.
pub fn calibrated_kv(lambda: f64) -> f64 {
    0.05 / (0.5 * TEN_YEARS).powf(lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaModel {
    PowerLaw,
    /// `β(t) = 1 − c / (d + √t)`, with `0 < c ≤ d` (both in √s).
    RdLongTerm { c: f64, d: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgingParams {
    pub vdd: f64,
    pub vth_nominal: f64,
    pub sigma_vth: f64,
    pub kv: f64,
    pub lambda: f64,
    pub beta_model: BetaModel,
    pub t_data: f64,
    pub current_exponent: f64,
    pub failure_fraction: f64,
    pub f2f_tolerance: f64,
    /// Recorded only; the shift law has no temperature term.
    pub temperature_c: f64,
}

impl Default for AgingParams {
    fn default() -> Self {
        let lambda = 1.0 / 6.0;
        AgingParams {
            vdd: 0.8,
            vth_nominal: 0.45,
            sigma_vth: 0.02,
            kv: calibrated_kv(lambda),
            lambda,
            beta_model: BetaModel::PowerLaw,
            t_data: DEFAULT_T_DATA,
            current_exponent: 1.3,
            failure_fraction: 0.5,
            f2f_tolerance: 0.01,
            temperature_c: 25.0,
        }
    }
}

impl AgingParams {
    pub fn no_pv() -> Self {
        AgingParams { sigma_vth: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |c: bool, msg: &str| if c { Ok(()) } else { Err(Error::config(msg.to_string())) };
        ok(self.vth_nominal > 0.0 && self.vdd > self.vth_nominal, "require vdd > vth_nominal > 0")?;
        ok(self.failure_fraction > 0.0 && self.failure_fraction < 1.0, "failure_fraction must lie in (0, 1)")?;
        ok(self.lambda > 0.0, "lambda must be positive")?;
        ok(self.sigma_vth >= 0.0, "sigma_vth must be non-negative")?;
        ok(self.kv > 0.0, "kv must be positive")?;
        ok(self.t_data > 0.0, "t_data must be positive")?;
        ok(self.current_exponent > 0.0, "current_exponent must be positive")?;
        ok(self.f2f_tolerance >= 0.0, "f2f_tolerance must be non-negative")?;
        if let BetaModel::RdLongTerm { c, d } = self.beta_model {
            ok(c > 0.0 && c <= d, "rd_long_term requires 0 < c <= d")?;
        }
        Ok(())
    }

    /// Shift at which a device with unaged threshold `vth0` reaches the
    /// failure fraction.
    pub fn failure_shift(&self, vth0: f64) -> Result<f64> {
        if vth0 >= self.vdd {
            return Err(Error::DegenerateDevice(format!("vth0 {vth0} V >= vdd {} V", self.vdd)));
        }
        Ok((self.vdd - vth0) * (1.0 - self.failure_fraction.powf(1.0 / self.current_exponent)))
    }

    fn rd_h(&self, t: f64, c: f64, d: f64) -> f64 {
        let beta = 1.0 - c / (d + t.sqrt());
        let x = 1.0 - beta.powf(1.0 / (2.0 * self.lambda));
        x.powf(-2.0 * self.lambda)
    }

    /// The shift separates as `amplitude(kv) · α^λ · time_factor(t)`.
    pub(crate) fn amplitude(&self, kv: f64) -> f64 {
        match self.beta_model {
            BetaModel::PowerLaw => kv,
            BetaModel::RdLongTerm { .. } => (kv * kv * self.t_data).powf(self.lambda),
        }
    }

    pub(crate) fn time_factor(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match self.beta_model {
            BetaModel::PowerLaw => t.powf(self.lambda),
            BetaModel::RdLongTerm { c, d } => self.rd_h(t, c, d) - self.rd_h(0.0, c, d),
        }
    }

    /// Inverse of `time_factor`; `+∞` when no time below 1e40 s reaches `g`.
    pub(crate) fn time_for_factor(&self, g: f64) -> f64 {
        if g <= 0.0 {
            return 0.0;
        }
        match self.beta_model {
            BetaModel::PowerLaw => g.powf(1.0 / self.lambda),
            BetaModel::RdLongTerm { .. } => bisect_time(|t| self.time_factor(t) >= g),
        }
    }

    fn shift_unchecked(&self, alpha: f64, t: f64) -> f64 {
        if alpha == 0.0 || t == 0.0 {
            return 0.0;
        }
        self.amplitude(self.kv) * alpha.powf(self.lambda) * self.time_factor(t)
    }
}

/// Smallest `t` with `fails(t)` for a monotone predicate, by bisection on a
/// geometrically grown bracket (relative tolerance 1e-6); `+∞` if no bracket
/// exists below 1e40 s.
fn bisect_time(fails: impl Fn(f64) -> bool) -> f64 {
    let mut hi = 1.0;
    while !fails(hi) {
        hi *= 2.0;
        if hi > 1e40 {
            return f64::INFINITY;
        }
    }
    while hi > 1e-30 && fails(hi / 2.0) {
        hi /= 2.0;
    }
    let mut lo = hi / 2.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if fails(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn delta_vth(alpha: f64, t: f64, p: &AgingParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::input(format!("alpha {alpha} outside [0, 1]")));
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::input(format!("time {t} is negative")));
    }
    Ok(p.shift_unchecked(alpha, t))
}

pub fn vth_at(site: usize, t: f64, pv: &PvSample, profile: &StressProfile, p: &AgingParams) -> Result<f64> {
    if site >= pv.len() || site >= profile.site_count() {
        return Err(Error::input(format!("site {site} not bound to the pv sample or profile")));
    }
    Ok(p.vth_nominal + pv.deltas[site] + delta_vth(profile.alpha(site), t, p)?)
}

pub fn on_current_ratio(vth_t: f64, vth_0: f64, p: &AgingParams) -> Result<f64> {
    if vth_0 >= p.vdd {
        return Err(Error::DegenerateDevice(format!("vth0 {vth_0} V >= vdd {} V", p.vdd)));
    }
    if vth_t >= p.vdd {
        return Ok(0.0);
    }
    Ok(((p.vdd - vth_t) / (p.vdd - vth_0)).powf(p.current_exponent))
}

/// Time for one site to reach the failure fraction, by bisection on a
/// geometrically grown bracket (relative tolerance 1e-6). `+∞` means the site
/// never fails: either α = 0 or no bracket was found below 1e40 s.
pub fn site_lifetime(alpha: f64, pv_delta: f64, p: &AgingParams) -> Result<f64> {
    delta_vth(alpha, 0.0, p)?;
    let vth0 = p.vth_nominal + pv_delta;
    let limit = p.failure_shift(vth0)?;
    if alpha == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(bisect_time(|t| p.shift_unchecked(alpha, t) >= limit))
}

/// Closed-form inverse of the power law; falls back to bisection otherwise.
fn site_lifetime_fast(alpha: f64, pv_delta: f64, p: &AgingParams) -> Result<f64> {
    match p.beta_model {
        BetaModel::PowerLaw => {
            let limit = p.failure_shift(p.vth_nominal + pv_delta)?;
            if alpha == 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok((limit / p.kv).powf(1.0 / p.lambda) / alpha)
        }
        BetaModel::RdLongTerm { .. } => site_lifetime(alpha, pv_delta, p),
    }
}

/// Per-site lifetimes for a profile.
pub fn site_lifetimes(profile: &StressProfile, pv: &PvSample, p: &AgingParams) -> Result<Vec<f64>> {
    if profile.site_count() == 0 || profile.vectors == 0 {
        return Err(Error::input("empty stress profile"));
    }
    if pv.len() != profile.site_count() {
        return Err(Error::input(format!(
            "pv sample covers {} sites, profile {}",
            pv.len(),
            profile.site_count()
        )));
    }
    let alphas = profile.alphas();
    let one = |s: usize| site_lifetime_fast(alphas[s], pv.deltas[s], p);
    if matches!(p.beta_model, BetaModel::PowerLaw) {
        (0..alphas.len()).map(one).collect()
    } else {
        (0..alphas.len()).into_par_iter().map(one).collect()
    }
}

/// Minimum site lifetime and the sites within the F2F tolerance of it.
pub fn circuit_lifetime(profile: &StressProfile, pv: &PvSample, p: &AgingParams) -> Result<(f64, F2FSet)> {
    let lifetimes = site_lifetimes(profile, pv, p)?;
    Ok(min_and_f2f(&lifetimes, p.f2f_tolerance))
}

pub fn min_and_f2f(lifetimes: &[f64], tolerance: f64) -> (f64, F2FSet) {
    let min = lifetimes.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = min * (1.0 + tolerance);
    let sites = (0..lifetimes.len()).filter(|&s| lifetimes[s] <= bound).collect();
    (min, F2FSet { sites, tolerance })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvSample {
    pub deltas: Vec<f64>,
    pub seed: u64,
}

impl PvSample {
    pub fn zeros(sites: usize) -> Self {
        PvSample { deltas: vec![0.0; sites], seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

pub fn sample_pv(p: &AgingParams, site_count: usize, seed: u64) -> PvSample {
    if p.sigma_vth == 0.0 {
        return PvSample { deltas: vec![0.0; site_count], seed };
    }
    let normal = Normal::new(0.0, p.sigma_vth).expect("sigma validated non-negative");
    let mut r = rng::stream(seed);
    let deltas = (0..site_count).map(|_| normal.sample(&mut r)).collect();
    PvSample { deltas, seed }
}

/// A set of site indices, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct F2FSet {
    pub sites: Vec<usize>,
    pub tolerance: f64,
}

impl F2FSet {
    pub fn new(mut sites: Vec<usize>, tolerance: f64) -> Self {
        sites.sort_unstable();
        sites.dedup();
        F2FSet { sites, tolerance }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    pub fn is_subset(&self, other: &F2FSet) -> bool {
        self.sites.iter().all(|&s| other.contains(s))
    }

    pub fn union(&self, other: &F2FSet) -> F2FSet {
        let mut v = self.sites.clone();
        v.extend_from_slice(&other.sites);
        F2FSet::new(v, self.tolerance)
    }

    pub fn intersection_len(&self, other: &F2FSet) -> usize {
        self.sites.iter().filter(|&&s| other.contains(s)).count()
    }

    /// Jaccard similarity; two empty sets are similar 0.
    pub fn jaccard(&self, other: &F2FSet) -> f64 {
        let inter = self.intersection_len(other);
        let union = self.len() + other.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(alphas: &[f64]) -> StressProfile {
        let vectors = 1000;
        StressProfile {
            zero_counts: alphas.iter().map(|a| (a * vectors as f64).round() as u64).collect(),
            vectors,
            t_data: DEFAULT_T_DATA,
        }
    }

    #[test]
    fn calibration() {
        let p = AgingParams::default();
        let d = delta_vth(0.5, TEN_YEARS, &p).unwrap();
        assert!((d - 0.05).abs() < 0.0005, "{d}");
        assert!((p.kv - 0.0021511).abs() < 1e-6, "{}", p.kv);
    }

    #[test]
    fn zero_stress_or_time() {
        let p = AgingParams::default();
        assert_eq!(delta_vth(0.0, 1e9, &p).unwrap(), 0.0);
        assert_eq!(delta_vth(0.7, 0.0, &p).unwrap(), 0.0);
        let rd = AgingParams { beta_model: BetaModel::RdLongTerm { c: 1.0, d: 1.0 }, ..p };
        assert_eq!(delta_vth(0.7, 0.0, &rd).unwrap(), 0.0);
        assert!(delta_vth(1.2, 1.0, &p).is_err());
        assert!(delta_vth(0.5, -1.0, &p).is_err());
    }

    #[test]
    fn vth_examples() {
        let p = AgingParams::default();
        let prof = profile(&[0.5, 0.0]);
        let pv = PvSample { deltas: vec![0.02, 0.0], seed: 0 };
        assert!((vth_at(1, 0.0, &PvSample::zeros(2), &prof, &p).unwrap() - 0.45).abs() < 1e-12);
        assert!((vth_at(0, 0.0, &pv, &prof, &p).unwrap() - 0.47).abs() < 1e-12);
        assert_eq!(vth_at(1, 1e12, &pv, &prof, &p).unwrap(), 0.45);
        assert!(vth_at(2, 0.0, &pv, &prof, &p).is_err());
    }

    #[test]
    fn on_current_examples() {
        let p = AgingParams::default();
        assert_eq!(on_current_ratio(0.45, 0.45, &p).unwrap(), 1.0);
        assert_eq!(on_current_ratio(0.8, 0.45, &p).unwrap(), 0.0);
        // (1 - x / 0.35)^1.3 = 0.5 solved by hand: x = 0.35 (1 - 0.5^(1/1.3)).
        let x = 0.144_67;
        assert!((on_current_ratio(0.45 + x, 0.45, &p).unwrap() - 0.5).abs() < 1e-4);
        assert!(matches!(on_current_ratio(0.5, 0.8, &p), Err(Error::DegenerateDevice(_))));
    }

    #[test]
    fn lifetime_monotone_and_fast_path() {
        let p = AgingParams::default();
        assert_eq!(site_lifetime(0.0, 0.0, &p).unwrap(), f64::INFINITY);
        assert!(site_lifetime(0.9, 0.0, &p).unwrap() < site_lifetime(0.1, 0.0, &p).unwrap());
        for &(a, pv) in &[(0.5, 0.0), (0.01, 0.03), (1.0, -0.05), (0.73, 0.011)] {
            let slow = site_lifetime(a, pv, &p).unwrap();
            let fast = site_lifetime_fast(a, pv, &p).unwrap();
            assert!(((slow - fast) / fast).abs() < 2e-6, "{a} {pv}: {slow} vs {fast}");
        }
    }

    #[test]
    fn f2f_examples() {
        let p = AgingParams::no_pv();
        let (_, all) = circuit_lifetime(&profile(&[0.5; 6]), &PvSample::zeros(6), &p).unwrap();
        assert_eq!(all.sites, (0..6).collect::<Vec<_>>());
        let (_, one) = circuit_lifetime(&profile(&[0.5, 0.5, 1.0, 0.5]), &PvSample::zeros(4), &p).unwrap();
        assert_eq!(one.sites, vec![2]);
        let empty = StressProfile::empty(0);
        assert!(circuit_lifetime(&empty, &PvSample::zeros(0), &p).is_err());
    }

    #[test]
    fn pv_sampling() {
        let p = AgingParams::default();
        assert_eq!(sample_pv(&AgingParams::no_pv(), 5, 3).deltas, vec![0.0; 5]);
        assert_eq!(sample_pv(&p, 100, 9), sample_pv(&p, 100, 9));
        assert_ne!(sample_pv(&p, 100, 9), sample_pv(&p, 100, 10));
    }

    #[test]
    fn set_ops() {
        let a = F2FSet::new(vec![3, 1, 2], 0.01);
        let b = F2FSet::new(vec![2, 3, 4, 5], 0.01);
        assert_eq!(a.union(&b).sites, vec![1, 2, 3, 4, 5]);
        assert!((a.jaccard(&b) - 2.0 / 5.0).abs() < 1e-12);
        assert!(F2FSet::new(vec![2], 0.0).is_subset(&a));
        assert!(!b.is_subset(&a));
    }

    #[test]
    fn params_validate() {
        assert!(AgingParams::default().validate().is_ok());
        let bad = AgingParams { failure_fraction: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AgingParams { vdd: 0.4, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
