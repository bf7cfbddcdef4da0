use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} ({name}) value {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        dim: usize,
        name: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },

    #[error(
        "n_tx = {0} is not a perfect square; use a free-placement method (naive-bo or bcd-bo)"
    )]
    NotSquare(usize),

    #[error("vector is not unit norm (norm = {0})")]
    NotUnit(f64),

    #[error("standard deviation must be non-negative, got {0}")]
    NegativeStd(f64),

    #[error("covariance factorization failed at maximum jitter")]
    IllConditioned,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid budget: {0}")]
    Budget(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
