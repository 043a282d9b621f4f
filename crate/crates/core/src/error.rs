use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("mask exhausted: {0}")]
    MaskExhausted(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("stale gradient: optimizer step requested without a fresh backward pass ({0})")]
    StaleGradient(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("window [{start}, {end}) exceeds record of length {len}")]
    Boundary { start: i64, end: i64, len: usize },

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("need at least 3 QRS complexes, got {0}")]
    InsufficientComplexes(usize),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("dataset construction failed: {0}")]
    Construction(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
