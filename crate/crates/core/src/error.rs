use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Domain { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("mode {mode} out of range for a {order}-mode tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("policy has {found} entries but the tensor has {expected} elements")]
    PolicyLength { expected: usize, found: usize },

    #[error("rank {rank} out of range for {ranks} ranks (line {line})")]
    RankOutOfRange { rank: u64, ranks: usize, line: usize },

    #[error("dense oracle cap exceeded: {requested} > {cap}")]
    CapExceeded { requested: usize, cap: usize },

    #[error("rank {rank} has no current copy of factor {mode} row {row}")]
    MissingFactorRow { rank: usize, mode: usize, row: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
