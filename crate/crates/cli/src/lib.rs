//! Config-driven experiment runner for `qci-core`.

pub mod config;
pub mod output;
pub mod run;

use qci_core::QciError;
use thiserror::Error;

pub use config::{Experiment, RunConfig};
pub use output::RunManifest;
pub use run::{run, RunReport};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] QciError),
}

impl RunError {
    /// Process exit code: 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            _ => 1,
        }
    }
}
