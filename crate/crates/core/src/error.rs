use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Geometry,
    Numeric,
    Io,
}

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("numerical failure: {msg} (condition number {condition:.3e})")]
    IllConditioned { msg: String, condition: f64 },

    #[error("insufficient decay range: {0}")]
    DecayRange(String),

    #[error("sampling failed after {attempts} attempts: {what}")]
    Sampling { what: String, attempts: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("WAV error on {path:?}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("malformed document {path:?}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidGeometry(_) | Error::Sampling { .. } => ErrorKind::Geometry,
            Error::Config(_) | Error::Json { .. } | Error::Shape { .. } => ErrorKind::Config,
            Error::Domain(_)
            | Error::IllConditioned { .. }
            | Error::DecayRange(_)
            | Error::Degenerate(_)
            | Error::Internal(_) => ErrorKind::Numeric,
            Error::Io { .. } => ErrorKind::Io,
            Error::Wav { source, .. } => match source {
                hound::Error::IoError(_) => ErrorKind::Io,
                _ => ErrorKind::Config,
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
