use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid clock time {text:?}: {field} {reason}")]
    ParseClock {
        text: String,
        field: &'static str,
        reason: String,
    },

    #[error("invalid label space: {0}")]
    LabelSpace(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("cannot decode cyclic vector (0, 0) to a clock time")]
    Undecodable,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("image is noiseless: lowest-variance blocks have zero variance")]
    Noiseless,

    #[error("image has no signal: total variance {total_var} does not exceed noise variance {noise_var}")]
    NoSignal { total_var: f64, noise_var: f64 },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("model file: {0}")]
    Model(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad inputs (as opposed to I/O failures).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
