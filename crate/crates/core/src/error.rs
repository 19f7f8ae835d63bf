use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MbpError>;

#[derive(Debug, Error)]
pub enum MbpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The instance has no meaningful penalty interval (e.g. an edgeless graph).
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("penalty strategy unavailable: {0}")]
    StrategyUnavailable(String),

    #[error("solver capability exceeded: {0}")]
    Capability(String),

    #[error("unknown solver id `{0}`")]
    UnknownSolver(String),

    #[error("solver id `{0}` is already registered")]
    DuplicateSolver(String),

    #[error("model is not trained: {0}")]
    UntrainedModel(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema mismatch: found {found}, expected {expected}")]
    Schema { found: String, expected: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MbpError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MbpError::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        MbpError::Parse { line, message: msg.into() }
    }
}
