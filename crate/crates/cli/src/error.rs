use std::process::ExitCode;

use diffnum::DiffError;
use tage_core::TageError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing dependency: {0}")]
    Missing(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Other(_) => 1,
        })
    }
}

impl From<TageError> for CliError {
    fn from(e: TageError) -> Self {
        match e {
            TageError::NonFinite(_) => CliError::Numeric(e.to_string()),
            TageError::Diff(DiffError::NonFinite { .. }) => CliError::Numeric(e.to_string()),
            TageError::InvalidConfig(_) | TageError::MissingLabels(_) => CliError::Config(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
