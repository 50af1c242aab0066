use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("dimension mismatch at frame {frame}: {message}")]
    FrameDimension { frame: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: String,
    },

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("kinematic tree error: {0}")]
    Tree(String),

    #[error("joint `{joint}` has invalid limits [{lo}, {hi}]")]
    Limits { joint: String, lo: f64, hi: f64 },

    #[error("retarget map does not cover joints: {}", missing.join(", "))]
    IncompleteMap { missing: Vec<String> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("sequence too short: need at least {needed} frames, got {actual}")]
    TooShort { needed: usize, actual: usize },

    #[error("environment stepped before reset")]
    NotReset,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(expected: usize, actual: usize, context: impl Into<String>) -> Self {
        Error::Dimension {
            expected,
            actual,
            context: context.into(),
        }
    }
}
