use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the coordination library.
#[derive(Debug, Error)]
pub enum BiclError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("robot index {index} out of range for {robots} robots")]
    RobotIndex { index: usize, robots: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("insufficient data: need {needed} transitions, buffer holds {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BiclError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BiclError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = BiclError> = std::result::Result<T, E>;
