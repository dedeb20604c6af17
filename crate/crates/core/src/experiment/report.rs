// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::systolic::LifetimeStats;
use crate::{Error, Result};

/// Index of an experiment output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub baseline: String,
    pub scenarios: Vec<String>,
    pub mitigations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub mitigation: String,
    pub iterations: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub normalized_mean: f64,
    pub improvement_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
    #[serde(skip)]
    pub stats: Vec<LifetimeStats>,
}

const HEADER: &str =
    "scenario,mitigation,iterations,mean_seconds,std_seconds,min_seconds,max_seconds,normalized_mean,improvement_pct";

impl Comparison {
    /// Normalize every scenario to the baseline mean.
    pub fn from_stats(m: &Manifest, mut stats: Vec<LifetimeStats>) -> Result<Self> {
        if stats.len() != m.scenarios.len() || m.mitigations.len() != m.scenarios.len() {
            return Err(Error::Format("manifest and results disagree on scenario count".into()));
        }
        let base = stats
            .iter()
            .find(|s| s.scenario == m.baseline)
            .map(|s| s.mean)
            .ok_or_else(|| Error::Format(format!("baseline {:?} missing", m.baseline)))?;
        let mut rows = Vec::with_capacity(stats.len());
        for (st, mitigation) in stats.iter_mut().zip(&m.mitigations) {
            st.normalize_to(&m.baseline, base);
            let normalized_mean = st.mean / base;
            rows.push(ComparisonRow {
                scenario: st.scenario.clone(),
                mitigation: mitigation.clone(),
                iterations: st.iterations,
                mean_seconds: st.mean,
                std_seconds: st.std,
                min_seconds: st.min,
                max_seconds: st.max,
                normalized_mean,
                improvement_pct: 100.0 * (normalized_mean - 1.0),
            });
        }
        Ok(Comparison { baseline: m.baseline.clone(), rows, stats })
    }

    pub fn row(&self, scenario: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.scenario == scenario)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.scenario,
                r.mitigation,
                r.iterations,
                r.mean_seconds,
                r.std_seconds,
                r.min_seconds,
                r.max_seconds,
                r.normalized_mean,
                r.improvement_pct
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("ascii"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("comparison.csv"), self.to_csv()?)?;
        std::fs::write(dir.join("comparison.json"), self.to_json()?)?;
        Ok(())
    }
}

/// Rebuild the comparison of an experiment directory from its manifest and
/// per-scenario lifetime CSVs.
pub fn recompute(dir: &Path) -> Result<Comparison> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| Error::Format(format!("{}: {e}", dir.join("manifest.json").display())))?;
    let m: Manifest = serde_json::from_str(&text)?;
    let stats = m
        .scenarios
        .iter()
        .map(|s| {
            let path = dir.join(s).join("lifetimes.csv");
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            LifetimeStats::read_csv(s, &text)
        })
        .collect::<Result<Vec<_>>>()?;
    Comparison::from_stats(&m, stats)
}
