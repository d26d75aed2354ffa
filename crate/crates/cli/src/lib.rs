//! Scenario files, command workflows and report emission for `brisk`.

pub mod bench;
pub mod commands;
pub mod output;
pub mod render;
pub mod scenario;

use thiserror::Error;

use brisk_core::geometry::GeometryError;
use brisk_core::process::ProcessError;
use brisk_core::risk::RiskError;

pub use output::{Format, Output, Status};
pub use scenario::{Scenario, ScenarioError, ScenarioFile};

/// Every failure maps to exit code 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("{0}")]
    Usage(String),
    #[error("generator: {0}")]
    Generator(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Risk(e.into())
    }
}

impl From<ProcessError> for CliError {
    fn from(e: ProcessError) -> Self {
        CliError::Risk(e.into())
    }
}
