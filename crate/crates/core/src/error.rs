use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator and bandit library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: vehicle {vehicle} coincides with base station {bs}")]
    DegenerateGeometry { vehicle: u64, bs: usize },

    #[error("antenna count must be at least 1")]
    ZeroAntennas,

    #[error("invalid codebook node: {0}")]
    InvalidNode(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("trace line {line}: {message}")]
    TraceParse { line: usize, message: String },

    #[error("trace validation: {0}")]
    TraceValidation(String),

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
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

pub type Result<T> = std::result::Result<T, Error>;
