use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("environment error: {0}")]
    Env(String),

    #[error("statistical test undefined: {0}")]
    UndefinedTest(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV at {}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { context, expected, got }
    }

    #[cfg(feature = "harness")]
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
