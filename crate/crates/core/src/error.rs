use diffnum::DiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TageError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing labels: {0}")]
    MissingLabels(String),
    #[error("empty graph")]
    EmptyGraph,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("frozen encoder parameters changed during {0}")]
    EncoderMutated(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TageError>;
