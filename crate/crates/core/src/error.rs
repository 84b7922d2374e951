//! Error type shared by the solver, storage and I/O layers.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular tridiagonal system ({context}) at row {row}: pivot {pivot:e}")]
    SingularSystem {
        context: String,
        row: usize,
        pivot: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{what} did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged {
        what: String,
        iterations: usize,
        last_change: f64,
        history: Vec<f64>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config validation failed: {0}")]
    ConfigInvalid(String),

    #[error("malformed record {path}: {message}")]
    Record { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical method itself (as opposed to bad
    /// input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. } | Error::NonFinite(_) | Error::NotConverged { .. }
        )
    }
}
