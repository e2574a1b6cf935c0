//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset ingestion, training, and the optimizers.
#[derive(Debug, Error)]
pub enum MedleyError {
    /// A text input (dataset file, serialized model, split record) could not
    /// be parsed. Lines are 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An operation was called with arguments that violate its contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Shapes of inputs do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A numerical routine failed (non-finite loss, Cholesky breakdown, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MedleyError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        MedleyError::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        MedleyError::Numerical(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        MedleyError::Parse {
            line,
            msg: msg.into(),
        }
    }
}
