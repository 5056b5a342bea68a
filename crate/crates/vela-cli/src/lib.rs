//! Command-line driver for the viscoelastic simulator: TOML run
//! configuration plus the simulate / sweep / nullcheck / inequalities /
//! inspect workflows, exposed as a library so the binary stays a thin
//! argument-parsing shell.

pub mod config;
pub mod run;

pub use config::{ModelChoice, RunConfig};
pub use run::{
    inspect_snapshot, run_inequalities, run_nullcheck, run_simulation, run_sweep, SimArtifacts,
    SweepReport,
};
