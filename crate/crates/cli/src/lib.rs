//! Configuration, orchestration and persistence for the verification suites.

pub mod config;
pub mod run;
pub mod suites;

pub use config::{Experiment, ExperimentConfig};
pub use run::{execute, report, RunRecord};
