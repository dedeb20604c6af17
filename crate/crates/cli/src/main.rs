// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mulife_core::aging::circuit_lifetime;
use mulife_core::experiment::{self, ExperimentConfig};
use mulife_core::logicsim::profile_alpha;
use mulife_core::oracle::{build_oracle, EXHAUSTIVE_MAX_WIDTH};
use mulife_core::selector::{build_ensemble, f1, overhead, synthesize};
use mulife_core::{AgingParams, Arch, Netlist, OracleTable, PvSample, SelectorFn, TransformPolicy, WorkloadSpec};

#[derive(Parser)]
#[command(name = "mulife", version, about = "NBTI stress profiling and aging mitigation for integer multipliers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a multiplier or adder netlist.
    Gen {
        #[arg(long)]
        arch: Arch,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-site stress probabilities under a transform policy.
    Profile {
        #[arg(long)]
        netlist: PathBuf,
        /// Uniform vectors; omitted means exhaustive up to width 8.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `none`, `zbp`, `trng:<p>`, `oracle:<file>` or `sm:<file>`.
        #[arg(long, default_value = "none")]
        policy: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the oracle table for a signed multiplier.
    Oracle {
        #[arg(long)]
        netlist: PathBuf,
        /// Uniform training vectors; omitted means exhaustive up to width 8.
        #[arg(long)]
        profile_count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Aging parameters (TOML).
        #[arg(long)]
        aging: Option<PathBuf>,
        /// Build against a sampled variation draw instead of nominal devices.
        #[arg(long)]
        pv_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a k-input selector from an oracle table.
    Synth {
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long)]
        k: usize,
        /// Netlist the overhead is reported against.
        #[arg(long)]
        netlist: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a selector ensemble from clustered variation scenarios.
    Ensemble {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long, default_value_t = 1000)]
        scenarios: usize,
        #[arg(long = "P", default_value_t = 3)]
        size: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        profile_count: Option<usize>,
        #[arg(long)]
        aging: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the systolic-array Monte Carlo of an experiment config.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        /// Overrides every scenario's iteration count.
        #[arg(long)]
        iters: Option<usize>,
        /// Overrides the global and every per-scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every scenario of an experiment config and write the comparison.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild the comparison table of an output directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn workload(count: Option<usize>, seed: u64, width: usize) -> WorkloadSpec {
    match count {
        Some(n) => WorkloadSpec::uniform(seed, n),
        None if width <= EXHAUSTIVE_MAX_WIDTH => WorkloadSpec::Exhaustive,
        None => WorkloadSpec::uniform(seed, 1 << 16),
    }
}

fn aging(path: Option<&Path>) -> Result<AgingParams> {
    Ok(match path {
        Some(p) => experiment::load_aging(p)?,
        None => AgingParams::default(),
    })
}

fn load_netlist(path: &Path) -> Result<Netlist> {
    Netlist::load(path).with_context(|| format!("reading netlist {}", path.display()))
}

fn parse_policy(spec: &str, seed: u64) -> Result<TransformPolicy> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match (kind, arg) {
        ("none", "") => TransformPolicy::None,
        ("zbp", "") => TransformPolicy::Zbp,
        ("trng", p) => {
            let p: f64 = p.parse().with_context(|| format!("trng probability `{p}`"))?;
            mulife_core::baselines::trng_policy(p, seed)?
        }
        ("oracle", f) if !f.is_empty() => TransformPolicy::Oracle(Arc::new(OracleTable::load(Path::new(f))?)),
        ("sm", f) if !f.is_empty() => TransformPolicy::Selector(Arc::new(SelectorFn::load(Path::new(f))?)),
        _ => bail!("unknown policy `{spec}` (expected none, zbp, trng:<p>, oracle:<file> or sm:<file>)"),
    })
}

fn print_comparison(c: &experiment::Comparison) -> Result<()> {
    print!("{}", c.to_csv()?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { arch, width, out } => {
            let n = match arch {
                Arch::RippleAdder => mulife_core::netlist::build_ripple_adder(width)?,
                _ => mulife_core::netlist::build_multiplier(width, arch)?,
            };
            n.save(&out)?;
            eprintln!("{} gates, {} sites, depth {}", n.gates.len(), n.site_count(), n.logic_depth());
        }
        Command::Profile { netlist, count, seed, policy, out } => {
            let n = load_netlist(&netlist)?;
            let policy = parse_policy(&policy, seed)?;
            let profile = profile_alpha(&n, &workload(count, seed, n.width), &policy)?;
            profile.save_csv(&n, &out)?;
            let (life, _) = circuit_lifetime(&profile, &PvSample::zeros(n.site_count()), &AgingParams::default())?;
            eprintln!(
                "max alpha {:.6}, mean |alpha - 0.5| {:.6}, nominal lifetime {life:.4e} s",
                profile.max_alpha(),
                profile.mean_imbalance()
            );
        }
        Command::Oracle { netlist, profile_count, seed, aging: a, pv_seed, out } => {
            let n = load_netlist(&netlist)?;
            let p = aging(a.as_deref())?;
            let pv = match pv_seed {
                Some(s) => mulife_core::aging::sample_pv(&p, n.site_count(), s),
                None => PvSample::zeros(n.site_count()),
            };
            let o = build_oracle(&n, &p, &pv, &workload(profile_count, seed, n.width))?;
            o.save(&out)?;
            let pr = &o.provenance;
            eprintln!(
                "{} iterations, lifetime {:.4e} s -> {:.4e} s",
                o.iterations(),
                pr.baseline_lifetime,
                pr.lifetimes.last().copied().unwrap_or(pr.baseline_lifetime)
            );
        }
        Command::Synth { oracle, k, netlist, out } => {
            let o = OracleTable::load(&oracle)?;
            let s = synthesize(&o, k)?;
            s.save(&out)?;
            eprintln!("bits {:?}, f1 {:.6}", s.bits(), f1(&s, &o)?);
            if let Some(path) = netlist {
                let r = overhead(&s, &load_netlist(&path)?)?;
                println!("{}", serde_json::to_string_pretty(&r)?);
            }
        }
        Command::Ensemble { netlist, scenarios, size, k, seed, profile_count, aging: a, out } => {
            let n = load_netlist(&netlist)?;
            let p = aging(a.as_deref())?;
            let pvs = experiment::pv_scenarios(&p, n.site_count(), scenarios, seed);
            let (e, report) = build_ensemble(&n, &p, &pvs, size, k, &workload(profile_count, seed, n.width))?;
            std::fs::write(&out, e.to_json()? + "\n").with_context(|| format!("writing {}", out.display()))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Montecarlo { config, iters, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            for s in &mut cfg.scenarios {
                if let Some(n) = iters {
                    s.monte_carlo.iterations = n;
                }
                if seed.is_some() {
                    s.seed = seed;
                }
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            print_comparison(&experiment::run(&cfg, &out)?)?;
        }
        Command::Compare { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            print_comparison(&experiment::run(&cfg, &out)?)?;
        }
        Command::Report { input, format, out } => {
            let c = experiment::recompute(&input)?;
            let text = match format {
                Format::Csv => c.to_csv()?,
                Format::Json => c.to_json()?,
            };
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    mulife_core::init_threads_from_env()?;
    run(Cli::parse())
}
