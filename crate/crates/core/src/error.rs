use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid mathematical argument (bad harmonic index, parameter out of range).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration that cannot be honoured (under-resolved grid, oversized carpet, ...).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("truncation at l_max = {l_max} leaves norm defect {achieved:.3e}, above tolerance {tol:.3e}")]
    Truncation { l_max: usize, achieved: f64, tol: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Input data inconsistent with the request (missing levels, uncovered angular momenta).
    #[error("data error: {0}")]
    Data(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
