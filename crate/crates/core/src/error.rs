use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("value {value} lies outside [-{bound}, {bound}]")]
    OutOfRange { value: f64, bound: f64 },

    #[error("non-finite state in simulation: {0}")]
    NonFinite(String),

    #[error("curriculum step {step} did not converge within {episodes} episodes")]
    NonConvergence { step: usize, episodes: usize },

    #[error("bundle format error: {0}")]
    Format(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
