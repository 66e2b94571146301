//! Std companion of `typematch-core`: JSON formats, parallel seeded simulation, the
//! verification suites and the command-line front end.

#![forbid(unsafe_code)]

pub mod cli;
pub mod config;
pub mod export;
pub mod generate;
pub mod registry;
pub mod simulate;
pub mod verify;

pub use config::{ExperimentConfig, InstanceDoc, ModelDoc};
pub use registry::build_policy;
pub use simulate::{simulate, SimulationReport};
pub use verify::{verify_suite, SuiteReport, SUITES};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error(transparent)]
    Core(#[from] typematch_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}
