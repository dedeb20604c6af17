// SPDX-License-Identifier: Apache-2.0

//! Config-driven experiments: a list of named scenarios, each a netlist,
//! aging parameters, a mitigation and Monte Carlo settings, compared against
//! a baseline scenario.
//!
//! The config is TOML:
//!
//! ```toml
//! schema_version = 1
//! seed = 1
//! baseline = "baseline_none"
//!
//! [[scenario]]
//! name = "baseline_none"
//! netlist = { width = 8, arch = "array_signed_bw" }
//! mitigation = { kind = "none" }
//! monte_carlo = { iterations = 1000, dim = 8 }
//!
//! [[scenario]]
//! name = "sm_ensemble_3"
//! netlist = { width = 8, arch = "array_signed_bw" }
//! mitigation = { kind = "ensemble", size = 3, k = 4 }
//! ```
//!
//! Scenarios that share netlist, aging parameters, Monte Carlo settings and
//! seed see identical variation and workload draws, and are run together.

mod report;

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aging::{circuit_lifetime, sample_pv, AgingParams, PvSample};
use crate::baselines::{dvfs_lifetime, DvfsParams};
use crate::logicsim::{profile_sim, Simulator, TransformPolicy, WorkloadSpec};
use crate::netlist::{build_multiplier, Arch, Netlist};
use crate::oracle::{build_oracle, OracleTable, EXHAUSTIVE_MAX_WIDTH};
use crate::rng;
use crate::selector::{build_ensemble, synthesize, Ensemble, SelectorFn};
use crate::systolic::{monte_carlo_paired, LifetimeStats, Mitigation, SaConfig};
use crate::{Error, Result};

pub use report::{recompute, Comparison, ComparisonRow, Manifest};

pub const SCHEMA_VERSION: u32 = 1;

const TAG_ENSEMBLE: u64 = 0x656e;
const TAG_CIRCUIT: u64 = 0x6369;

fn default_baseline() -> String {
    "baseline_none".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_baseline")]
    pub baseline: String,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioConfig>,
    /// Directory that relative file paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub netlist: NetlistConfig,
    #[serde(default)]
    pub aging: AgingParams,
    /// Training and single-circuit workload; exhaustive up to width 8,
    /// otherwise 65 536 uniform pairs.
    #[serde(default)]
    pub workload: Option<WorkloadConfig>,
    #[serde(default)]
    pub mitigation: MitigationConfig,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    /// Overrides the global seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Single-multiplier variation samples in the lifetime report.
    #[serde(default = "default_circuit_samples")]
    pub circuit_samples: usize,
}

fn default_circuit_samples() -> usize {
    8
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetlistConfig {
    pub width: Option<usize>,
    pub arch: Option<Arch>,
    /// Netlist JSON; excludes `width` and `arch`.
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadConfig {
    Uniform {
        #[serde(default)]
        seed: u64,
        count: usize,
    },
    Exhaustive,
}

fn default_k() -> usize {
    4
}

fn default_size() -> usize {
    3
}

fn default_pv_scenarios() -> usize {
    1000
}

fn default_v_step() -> f64 {
    DvfsParams::default().v_step
}

fn default_v_max() -> f64 {
    DvfsParams::default().v_max
}

fn default_kv_scaling() -> f64 {
    DvfsParams::default().kv_voltage_scaling
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MitigationConfig {
    #[default]
    None,
    /// Built without variation unless `file` names a saved table.
    Oracle { file: Option<PathBuf> },
    Sm {
        #[serde(default = "default_k")]
        k: usize,
        file: Option<PathBuf>,
    },
    /// The first `size` members of a ranked list of `pool` selectors
    /// (default `size`), so that smaller ensembles nest inside larger ones.
    Ensemble {
        #[serde(default = "default_size")]
        size: usize,
        pool: Option<usize>,
        #[serde(default = "default_k")]
        k: usize,
        /// Variation scenarios clustered into signatures.
        #[serde(default = "default_pv_scenarios")]
        scenarios: usize,
        seed: Option<u64>,
        file: Option<PathBuf>,
    },
    Trng { p: f64 },
    Zbp,
    Dvfs {
        #[serde(default = "default_v_step")]
        v_step: f64,
        #[serde(default = "default_v_max")]
        v_max: f64,
        #[serde(default = "default_kv_scaling")]
        kv_voltage_scaling: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub dim: usize,
    pub iterations: usize,
    pub rounds: usize,
    pub inner: usize,
    pub acc_bits: u32,
    pub histogram_bins: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig { dim: 8, iterations: 1000, rounds: 16, inner: 256, acc_bits: 32, histogram_bins: 20 }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, dir).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        if self.scenarios.is_empty() {
            return Err(Error::config("no scenarios"));
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            let field = |f: &str| format!("scenario[{i}] ({}).{f}", s.name);
            if s.name.is_empty() || s.name.contains(['/', '\\']) || s.name.starts_with('.') {
                return Err(Error::config(format!("scenario[{i}].name {:?} is not a valid directory name", s.name)));
            }
            if self.scenarios[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::config(format!("duplicate scenario name {:?}", s.name)));
            }
            match (&s.netlist.file, s.netlist.width, s.netlist.arch) {
                (Some(_), None, None) | (None, Some(_), Some(_)) => {}
                _ => return Err(Error::config(format!("{}: give either file or both width and arch", field("netlist")))),
            }
            s.aging.validate().map_err(|e| Error::config(format!("{}: {e}", field("aging"))))?;
            if s.monte_carlo.iterations == 0 {
                return Err(Error::config(format!("{} must be at least 1", field("monte_carlo.iterations"))));
            }
        }
        if !self.scenarios.iter().any(|s| s.name == self.baseline) {
            return Err(Error::config(format!("baseline scenario {:?} not defined", self.baseline)));
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

impl ScenarioConfig {
    fn workload(&self, width: usize) -> WorkloadSpec {
        match &self.workload {
            Some(WorkloadConfig::Uniform { seed, count }) => WorkloadSpec::uniform(*seed, *count),
            Some(WorkloadConfig::Exhaustive) => WorkloadSpec::Exhaustive,
            None if width <= EXHAUSTIVE_MAX_WIDTH => WorkloadSpec::Exhaustive,
            None => WorkloadSpec::uniform(0, 1 << 16),
        }
    }
}

/// Artifacts shared between scenarios of one run.
#[derive(Default)]
struct Cache {
    netlists: HashMap<String, Arc<Netlist>>,
    oracles: HashMap<String, Arc<OracleTable>>,
    ensembles: HashMap<String, Arc<Ensemble>>,
}

struct Prepared {
    netlist: Arc<Netlist>,
    netlist_key: String,
    mitigation: Mitigation,
    seed: u64,
}

fn netlist_for(cfg: &ExperimentConfig, s: &ScenarioConfig, cache: &mut Cache) -> Result<(String, Arc<Netlist>)> {
    let (key, build): (String, Box<dyn Fn() -> Result<Netlist>>) = match (&s.netlist.file, s.netlist.width, s.netlist.arch) {
        (Some(f), _, _) => {
            let path = cfg.resolve(f);
            (format!("file:{}", path.display()), Box::new(move || Netlist::load(&path)))
        }
        (None, Some(w), Some(a)) => (format!("gen:{a}:{w}"), Box::new(move || build_multiplier(w, a))),
        _ => unreachable!("validated"),
    };
    if let Some(n) = cache.netlists.get(&key) {
        return Ok((key, n.clone()));
    }
    let n = Arc::new(build().map_err(|e| Error::config(format!("scenario {:?} netlist: {e}", s.name)))?);
    cache.netlists.insert(key.clone(), n.clone());
    Ok((key, n))
}

fn no_pv_oracle(n: &Netlist, key: &str, s: &ScenarioConfig, cache: &mut Cache) -> Result<Arc<OracleTable>> {
    let w = s.workload(n.width);
    let key = format!("{key}|{}|{w:?}", serde_json::to_string(&s.aging)?);
    if let Some(o) = cache.oracles.get(&key) {
        return Ok(o.clone());
    }
    let o = Arc::new(build_oracle(n, &s.aging, &PvSample::zeros(n.site_count()), &w)?);
    cache.oracles.insert(key, o.clone());
    Ok(o)
}

fn mitigation_for(
    cfg: &ExperimentConfig,
    s: &ScenarioConfig,
    n: &Netlist,
    key: &str,
    seed: u64,
    cache: &mut Cache,
) -> Result<Mitigation> {
    Ok(match &s.mitigation {
        MitigationConfig::None => Mitigation::None,
        MitigationConfig::Oracle { file: Some(f) } => Mitigation::Oracle(Arc::new(OracleTable::load(&cfg.resolve(f))?)),
        MitigationConfig::Oracle { file: None } => Mitigation::Oracle(no_pv_oracle(n, key, s, cache)?),
        MitigationConfig::Sm { file: Some(f), .. } => Mitigation::Sm(Arc::new(SelectorFn::load(&cfg.resolve(f))?)),
        MitigationConfig::Sm { k, file: None } => Mitigation::Sm(Arc::new(synthesize(&*no_pv_oracle(n, key, s, cache)?, *k)?)),
        MitigationConfig::Ensemble { file: Some(f), .. } => {
            Mitigation::Ensemble(Arc::new(Ensemble::from_json(&std::fs::read_to_string(cfg.resolve(f))?)?))
        }
        MitigationConfig::Ensemble { size, pool, k, scenarios, seed: eseed, file: None } => {
            let pool = pool.unwrap_or(*size);
            if pool < *size {
                return Err(Error::config(format!("ensemble pool {pool} smaller than size {size}")));
            }
            let eseed = eseed.unwrap_or_else(|| rng::derive(seed, &[TAG_ENSEMBLE]));
            let w = s.workload(n.width);
            let key = format!("{key}|{}|{w:?}|{pool}|{k}|{scenarios}|{eseed}", serde_json::to_string(&s.aging)?);
            let ranked = match cache.ensembles.get(&key) {
                Some(e) => e.clone(),
                None => {
                    let pvs = pv_scenarios(&s.aging, n.site_count(), *scenarios, eseed);
                    let e = Arc::new(build_ensemble(n, &s.aging, &pvs, pool, *k, &w)?.0);
                    cache.ensembles.insert(key, e.clone());
                    e
                }
            };
            Mitigation::Ensemble(if pool == *size { ranked } else { Arc::new(ranked.prefix(*size)) })
        }
        MitigationConfig::Trng { p } => Mitigation::Trng { p: *p },
        MitigationConfig::Zbp => Mitigation::Zbp,
        MitigationConfig::Dvfs { v_step, v_max, kv_voltage_scaling } => {
            Mitigation::Dvfs(DvfsParams { v_step: *v_step, v_max: *v_max, kv_voltage_scaling: *kv_voltage_scaling })
        }
    })
}

/// Aging parameters from a TOML table; missing fields take defaults.
pub fn load_aging(path: &Path) -> Result<AgingParams> {
    let text = std::fs::read_to_string(path)?;
    let p: AgingParams = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    p.validate()?;
    Ok(p)
}

/// Variation samples used to train an ensemble.
pub fn pv_scenarios(p: &AgingParams, sites: usize, count: usize, seed: u64) -> Vec<PvSample> {
    (0..count).map(|i| sample_pv(p, sites, rng::derive(seed, &[i as u64]))).collect()
}

/// One row of the single-multiplier lifetime report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitLifetime {
    pub scenario: String,
    pub seed: u64,
    pub lifetime_seconds: f64,
    pub f2f_sites: Vec<usize>,
}

/// Lifetimes of a single multiplier over `s.circuit_samples` variation
/// draws under the scenario's mitigation.
fn circuit_report(s: &ScenarioConfig, n: &Netlist, m: &Mitigation, seed: u64) -> Result<Vec<CircuitLifetime>> {
    let sim = Simulator::new(n)?;
    let w = s.workload(n.width);
    let baseline = profile_sim(&sim, &w, &TransformPolicy::None)?;
    let fixed = match m {
        Mitigation::None | Mitigation::Dvfs(_) | Mitigation::Ensemble(_) => None,
        _ => Some(profile_sim(&sim, &w, &m.policy(seed, 0, None)?)?),
    };
    let mut members: HashMap<usize, crate::logicsim::StressProfile> = HashMap::new();
    (0..s.circuit_samples)
        .map(|i| {
            let pseed = rng::derive(seed, &[TAG_CIRCUIT, i as u64]);
            let pv = sample_pv(&s.aging, n.site_count(), pseed);
            let (base_life, base_f2f) = circuit_lifetime(&baseline, &pv, &s.aging)?;
            let (lifetime_seconds, f2f) = match m {
                Mitigation::None => (base_life, base_f2f),
                Mitigation::Dvfs(d) => (dvfs_lifetime(&baseline, &pv, &s.aging, d)?, base_f2f),
                Mitigation::Ensemble(e) => {
                    let member = e.dispatch_index(&base_f2f);
                    let profile = match members.entry(member) {
                        Entry::Occupied(e) => e.into_mut(),
                        Entry::Vacant(e) => e.insert(profile_sim(&sim, &w, &m.policy(seed, 0, Some(&base_f2f))?)?),
                    };
                    circuit_lifetime(profile, &pv, &s.aging)?
                }
                _ => circuit_lifetime(fixed.as_ref().expect("profiled"), &pv, &s.aging)?,
            };
            Ok(CircuitLifetime { scenario: s.name.clone(), seed: pseed, lifetime_seconds, f2f_sites: f2f.sites })
        })
        .collect()
}

pub fn write_circuit_csv(rows: &[CircuitLifetime], mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "scenario,seed,lifetime_seconds,f2f_sites")?;
    for r in rows {
        let sites: Vec<String> = r.f2f_sites.iter().map(|s| s.to_string()).collect();
        writeln!(w, "{},{},{:e},{}", r.scenario, r.seed, r.lifetime_seconds, sites.join(";"))?;
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Run every scenario, write per-scenario outputs under `out/<name>/` and the
/// comparison table under `out/`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Comparison> {
    cfg.validate()?;
    let mut cache = Cache::default();
    let mut prepared = Vec::new();
    for s in &cfg.scenarios {
        let seed = s.seed.unwrap_or(cfg.seed);
        let (netlist_key, netlist) = netlist_for(cfg, s, &mut cache)?;
        let mitigation = mitigation_for(cfg, s, &netlist, &netlist_key, seed, &mut cache)
            .map_err(|e| Error::config(format!("scenario {:?} mitigation: {e}", s.name)))?;
        prepared.push(Prepared { netlist, netlist_key, mitigation, seed });
    }

    // Scenarios with identical array settings run as arms of one paired
    // Monte Carlo; results do not depend on the grouping.
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, (s, p)) in cfg.scenarios.iter().zip(&prepared).enumerate() {
        let key = format!(
            "{}|{}|{}|{}",
            p.netlist_key,
            serde_json::to_string(&s.aging)?,
            serde_json::to_string(&s.monte_carlo)?,
            p.seed
        );
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    let mut stats: Vec<Option<LifetimeStats>> = vec![None; cfg.scenarios.len()];
    for (_, members) in &groups {
        let first = &cfg.scenarios[members[0]];
        let mc = &first.monte_carlo;
        let base = SaConfig {
            dim: mc.dim,
            rounds: mc.rounds,
            inner: mc.inner,
            acc_bits: mc.acc_bits,
            aging: first.aging.clone(),
            ..SaConfig::new(prepared[members[0]].netlist.clone())
        };
        let arms: Vec<Mitigation> = members.iter().map(|&i| prepared[i].mitigation.clone()).collect();
        let results = monte_carlo_paired(&base, &arms, mc.iterations, prepared[members[0]].seed)
            .map_err(|e| Error::config(format!("scenario {:?}: {e}", first.name)))?;
        for (&i, mut st) in members.iter().zip(results) {
            st.scenario = cfg.scenarios[i].name.clone();
            stats[i] = Some(st);
        }
    }
    let stats: Vec<LifetimeStats> = stats.into_iter().map(|s| s.expect("every scenario ran")).collect();

    std::fs::create_dir_all(out)?;
    let mitigations: Vec<String> = prepared.iter().map(|p| p.mitigation.name()).collect();
    for ((s, p), st) in cfg.scenarios.iter().zip(&prepared).zip(&stats) {
        let dir = out.join(&s.name);
        std::fs::create_dir_all(&dir)?;
        write_file(&dir.join("lifetimes.csv"), |b| st.write_csv(b))?;
        write_file(&dir.join("histogram.csv"), |b| st.write_histogram_csv(s.monte_carlo.histogram_bins, b))?;
        let rows = circuit_report(s, &p.netlist, &p.mitigation, p.seed)?;
        write_file(&dir.join("circuit.csv"), |b| write_circuit_csv(&rows, b))?;
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        baseline: cfg.baseline.clone(),
        scenarios: cfg.scenarios.iter().map(|s| s.name.clone()).collect(),
        mitigations,
    };
    let comparison = Comparison::from_stats(&manifest, stats)?;
    for st in &comparison.stats {
        std::fs::write(out.join(&st.scenario).join("stats.json"), st.to_json()? + "\n")?;
    }
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    comparison.save(out)?;
    Ok(comparison)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
schema_version = 1
seed = 5

[[scenario]]
name = "baseline_none"
netlist = { width = 4, arch = "array_signed_bw" }
monte_carlo = { iterations = 3, dim = 2, rounds = 1, inner = 64 }
circuit_samples = 2

[[scenario]]
name = "sm"
netlist = { width = 4, arch = "array_signed_bw" }
mitigation = { kind = "sm", k = 3 }
monte_carlo = { iterations = 3, dim = 2, rounds = 1, inner = 64 }
circuit_samples = 2
"#;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    #[test]
    fn parses_and_defaults() {
        let c = parse(SMALL).unwrap();
        assert_eq!(c.baseline, "baseline_none");
        assert_eq!(c.scenarios[1].mitigation, MitigationConfig::Sm { k: 3, file: None });
        assert_eq!(c.scenarios[0].monte_carlo.acc_bits, 32);
        assert_eq!(c.scenarios[0].aging, AgingParams::default());
    }

    #[test]
    fn rejects_bad_configs() {
        let err = |t: &str| parse(t).unwrap_err().to_string();
        assert!(err("schema_version = 1\n").contains("no scenarios"));
        assert!(err("schema_version = 2\n").contains("schema_version"));
        let dup = SMALL.replace("name = \"sm\"", "name = \"baseline_none\"");
        assert!(err(&dup).contains("duplicate"));
        let typo = SMALL.replace("circuit_samples = 2\n\n[[scenario]]", "circuit_sample = 2\n\n[[scenario]]");
        let e = err(&typo);
        assert!(e.contains("circuit_sample") && e.contains("line"), "{e}");
        let bad_kind = SMALL.replace("kind = \"sm\"", "kind = \"magic\"");
        assert!(err(&bad_kind).contains("magic"));
        let no_base = SMALL.replace("name = \"baseline_none\"", "name = \"other\"");
        assert!(err(&no_base).contains("baseline"));
        let mixed = SMALL.replace("netlist = { width = 4, arch = \"array_signed_bw\" }\nmitigation", "netlist = { width = 4 }\nmitigation");
        assert!(err(&mixed).contains("netlist"));
    }

    #[test]
    fn runs_and_recomputes() {
        let c = parse(SMALL).unwrap();
        let dir = std::env::temp_dir().join(format!("mulife-exp-{}", std::process::id()));
        let cmp = run(&c, &dir).unwrap();
        assert_eq!(cmp.rows.len(), 2);
        assert_eq!(cmp.rows[0].normalized_mean, 1.0);
        assert_eq!(recompute(&dir).unwrap(), cmp);
        let circuit = std::fs::read_to_string(dir.join("sm/circuit.csv")).unwrap();
        assert_eq!(circuit.lines().count(), 3);
        assert!(circuit.starts_with("scenario,seed,lifetime_seconds,f2f_sites\nsm,"));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn grouped_and_separate_runs_agree() {
        let c = parse(SMALL).unwrap();
        let mut apart = c.clone();
        apart.scenarios[1].monte_carlo.histogram_bins = 7;
        let a = std::env::temp_dir().join(format!("mulife-exp-a-{}", std::process::id()));
        let b = std::env::temp_dir().join(format!("mulife-exp-b-{}", std::process::id()));
        let x = run(&c, &a).unwrap();
        let y = run(&apart, &b).unwrap();
        assert_eq!(x.rows, y.rows);
        std::fs::remove_dir_all(&a).unwrap();
        std::fs::remove_dir_all(&b).unwrap();
    }
}
