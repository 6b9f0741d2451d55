use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a numerical routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// A data file is malformed or inconsistent.
    #[error("{path}:{line}: {message}")]
    Ingest {
        path: String,
        line: usize,
        message: String,
    },

    /// A table could not be assembled into a rectangular grid.
    #[error("non-rectangular table, missing cells: {0}")]
    Ragged(String),

    /// Observations or configuration disagree with the model setup.
    #[error("configuration error: {0}")]
    Config(String),

    /// A linear-algebra or integration step produced unusable values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A run produced nothing to report.
    #[error("empty result: {0}")]
    Empty(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
