//! Seeded Monte Carlo experiments and the command-line interface.

pub mod cli;
pub mod config;
pub mod runner;
pub mod summary;
pub mod trial;

pub use config::ExperimentConfig;
pub use runner::{run_experiment, report};
pub use summary::{summarize, ExperimentSummary};
pub use trial::{run_trial, TrialContext, TrialRecord, TrialResult};
