//! Experiment harness: configuration files, seeded parallel runs, regret
//! traces and summaries, and lookup-table loading.

pub mod config;
pub mod error;
pub mod lookup;
pub mod runner;
pub mod trace;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use runner::{execute, run_experiment, write_output, ExperimentOutput};
