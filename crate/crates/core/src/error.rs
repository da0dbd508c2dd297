use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("layer {layer}: {message}")]
    Layer { layer: String, message: String },

    #[error("backward called before forward: no cached intermediates for {0}")]
    MissingCache(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("freeze interval k = {0} is invalid: k must be >= 2 so no two frozen layers are adjacent")]
    InvalidInterval(usize),

    #[error("frozen layer {index}: {message}")]
    Compose { index: usize, message: String },

    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("forward trace already consumed by a backward pass")]
    TapeConsumed,

    #[error("gradient tape does not match network: {0}")]
    TapeMismatch(String),

    #[error("{0} is not a trainable quantity")]
    NotTrainable(String),

    #[error("{path}: format error: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: truncated: expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn layer(layer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Layer {
            layer: layer.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
