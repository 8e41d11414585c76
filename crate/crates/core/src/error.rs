use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed WAV file: {0}")]
    Format(String),

    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("input too short: {0}")]
    EmptyInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("insufficient batch: {0}")]
    InsufficientBatch(String),

    #[error("infeasible alignment: target needs at least {required} frames, got {available}")]
    InfeasibleAlignment { required: usize, available: usize },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("insufficient trials: {0}")]
    InsufficientTrials(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
