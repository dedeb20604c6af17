// SPDX-License-Identifier: Apache-2.0

//! Gate-level NBTI stress profiling and two's-complement aging mitigation for
//! integer multipliers.
//!
//! The crate is organized bottom-up:
//!
//! * [`netlist`] builds adders and multipliers over {INV, NAND2, NOR2} and
//!   exposes every PMOS transistor as a stress site.
//! * [`logicsim`] evaluates netlists 64 vectors at a time and accumulates the
//!   per-site probability that a PMOS gate input is logic 0.
//! * [`aging`] turns stress probabilities and process variation into
//!   threshold shifts, ON-current degradation and lifetimes.
//! * [`oracle`] builds the ideal per-input transform table.
//! * [`selector`] compresses the table into small Boolean selector modules
//!   and ensembles of them.
//! * [`systolic`] runs the selectors inside a systolic array under Monte
//!   Carlo process variation.
//! * [`baselines`] and [`experiment`] provide the comparison mitigations and
//!   the config-driven experiment runner.

pub mod aging;
pub mod baselines;
mod error;
pub mod experiment;
pub mod logicsim;
pub mod netlist;
pub mod oracle;
pub mod rng;
pub mod selector;
pub mod systolic;

pub use aging::{AgingParams, BetaModel, F2FSet, PvSample};
pub use baselines::DvfsParams;
pub use error::{Error, Result};
pub use logicsim::{InputPair, StressProfile, TransformPolicy, WorkloadSpec};
pub use netlist::{Arch, GateKind, Netlist, PmosSite};
pub use oracle::OracleTable;
pub use selector::{Ensemble, OverheadReport, SelectorFn};
pub use systolic::{LifetimeStats, Mitigation, SaConfig};

/// Cap the global worker pool at `MULIFE_THREADS` when it is set. Call once,
/// before any parallel work.
pub fn init_threads_from_env() -> Result<()> {
    let Ok(v) = std::env::var("MULIFE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config(format!("MULIFE_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}
