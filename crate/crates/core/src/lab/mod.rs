//! Experiment harness: configs, seeded verification suites, JSON reports and
//! plot-ready tables.
//!
//! Exit codes of [`run`]: 0 when every selected suite passes, 1 when a suite
//! fails a check, 2 on configuration errors, 3 on numerical errors.

mod config;
pub mod models;
mod plot;
mod report;
mod runner;
mod suites;

pub use config::{ExperimentConfig, ModelConfig, RunConfig, ENV_PREFIX};
pub use plot::emit_plot_data;
pub use report::{Check, CheckStatus, Stamp, SuiteReport};
pub use runner::{exit_code, run, EXIT_CONFIG, EXIT_FAIL, EXIT_NUMERICAL, EXIT_OK};
pub use suites::{suite_names, verify, verify_with, Artifact, SuiteContext, SuiteOutput, SuiteSpec, SUITES};
