use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimensionality mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("class label {label} outside 1..={classes}")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("cannot train on an empty dataset")]
    EmptyTraining,

    #[error("invalid support vector: {0}")]
    InvalidSupport(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("classifier has not been trained")]
    Untrained,

    #[error("validation set is empty")]
    EmptyValidation,

    #[error("too few non-zero differences ({0}) for the signed-rank test")]
    TooFewDifferences(usize),

    #[error("degenerate dimensions: {0}")]
    DegenerateDimensions(String),

    #[error("invalid p-value {0}")]
    InvalidProbability(f64),

    #[error("cannot evaluate an empty stream")]
    EmptyStream,

    #[error("empty confusion accumulator")]
    EmptyAccumulator,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing input: {0}")]
    MissingInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
