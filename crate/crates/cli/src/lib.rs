//! Library side of the `htc` command-line tool.

pub mod commands;
pub mod config;
pub mod figures;
pub mod io;

use htc_core::ensemble::EnsembleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Schema(String),

    #[error("engine failure: {0}")]
    Engine(String),

    #[error("refused: {0}")]
    ResourceLimit(String),

    #[error("missing quantity: {0}")]
    Missing(String),

    #[error("oracle check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Engine(_) => 3,
            CliError::ResourceLimit(_) => 4,
            CliError::Missing(_) | CliError::CheckFailed(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::Config(_) | EnsembleError::Model(_) => CliError::Schema(e.to_string()),
            EnsembleError::ResourceLimit(m) => CliError::ResourceLimit(m),
            EnsembleError::Realization { .. } | EnsembleError::Analysis(_) => CliError::Engine(e.to_string()),
        }
    }
}
