//! Configuration, file formats, synthetic tasks and experiment runners
//! behind the `kt` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod report;
pub mod tasks;
pub mod validation;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::run_experiment;
pub use report::ExperimentReport;
pub use validation::run_theory_validation;
