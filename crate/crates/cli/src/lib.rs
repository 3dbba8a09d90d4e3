//! Batch front end for the Baker-domain laboratory: experiment configs in,
//! CSV/JSON/PPM artifacts out.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod experiment;
pub mod output;
pub mod render;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, Experiment, Summary, Task};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 config, 3 certification, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Certification(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

/// Exit status of a run whose checks did not all pass.
pub const EXIT_CHECK_FAILED: u8 = 3;
