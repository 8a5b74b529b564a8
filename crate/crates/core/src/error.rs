use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: i/o error{}: {source}", path.display(), offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
    Io {
        path: PathBuf,
        offset: Option<u64>,
        #[source]
        source: io::Error,
    },

    #[error("{}: format error: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: parse error at row {row}, column {column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "target reduction {target:.4}% is outside the achievable envelope [{low:.4}%, {high:.4}%] (tolerance {tolerance}%)"
    )]
    Calibration {
        target: f64,
        low: f64,
        high: f64,
        tolerance: f64,
    },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            offset: None,
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by caller-supplied parameters rather than data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Parameter(_))
    }
}
