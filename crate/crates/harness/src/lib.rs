//! Experiment harness for covariance ellipsoid approximation.
//!
//! Config files, report formats, the experiment registry and the command
//! implementations behind the `covapprox` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, Format};
pub use error::HarnessError;
pub use experiments::run_experiment;
pub use report::Report;
