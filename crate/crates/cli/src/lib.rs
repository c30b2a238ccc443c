//! Batch experiment front end for the fairness-constrained federated
//! trainer: config-driven runs, client-specific budget sweeps, and
//! side-by-side baseline comparisons, all emitting line-delimited records
//! for external plotting.

pub mod commands;
pub mod config;
pub mod report;
pub mod runner;

pub use commands::{cmd_budget_sweep, cmd_compare, cmd_run};
pub use config::{CliError, CliResult, Overrides, RunConfig};
