use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("brute-force enumeration limited to N <= {max}, got N = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inconsistent estimates: {0}")]
    Inconsistent(String),

    #[error("unknown algorithm '{0}'")]
    UnknownAlgorithm(String),

    #[error("only {eligible} products pass the filter, {requested} requested")]
    NotEnoughProducts { eligible: usize, requested: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
