//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed textual input (graph DSL, facts file, gated document).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A query or constructor argument violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested operation is not supported for this input class.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Numerical failure (singular matrix, indefinite covariance, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// No graph satisfies the hard constraints of a learning problem.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
