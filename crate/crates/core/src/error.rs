use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed image header: {0}")]
    MalformedHeader(String),

    #[error("malformed image body: expected {expected} bytes, found {found}")]
    MalformedBody { expected: usize, found: usize },

    #[error("unsupported image: {0}")]
    Unsupported(String),

    #[error("zero-dimension image ({width}x{height})")]
    ZeroDimension { width: usize, height: usize },

    #[error("data length {len} does not match {width}x{height}")]
    LengthMismatch {
        width: usize,
        height: usize,
        len: usize,
    },

    #[error("intensity {value} at index {index} is outside [0, 1]")]
    IntensityOutOfRange { index: usize, value: f64 },

    #[error("image too small: {width}x{height} cannot be shrunk")]
    ImageTooSmall { width: usize, height: usize },

    #[error("edge map dimension mismatch: map is {found:?}, image is {expected:?}")]
    EdgeMapDimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("dimension mismatch: {what} is {found:?}, expected {expected:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("label {label} at index {index} is not below k = {k}")]
    LabelOutOfRange { index: usize, label: usize, k: usize },

    #[error("class count mismatch: {0}")]
    ClassCountMismatch(String),

    #[error("k = {k} exceeds the number of pixels ({pixels})")]
    TooManyClasses { k: usize, pixels: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
