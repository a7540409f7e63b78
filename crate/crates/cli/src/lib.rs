//! Experiment harness for the `hypergrad` toolkit: JSON configs, problem
//! registry, and the `run`, `gradcheck` and `sweep-k` commands.

pub mod config;
pub mod gradcheck;
pub mod output;
pub mod registry;
pub mod run;
pub mod sweep;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig};
pub use gradcheck::{gradcheck, GradcheckReport};
pub use run::{execute, run, RunSummary};
pub use sweep::{parse_ks, sweep_k, SweepK};
