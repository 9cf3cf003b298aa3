use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("coordinate ({x}, {y}) outside the interior of a {width}x{height} image")]
    OutOfRange {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("no foreground")]
    NoForeground,
    #[error("empty mask")]
    EmptyMask,
    #[error("single-class dataset")]
    SingleClass,
    #[error("non-finite feature value at example {0}")]
    NonFinite(usize),
    #[error("feature length mismatch: model expects {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no label for segment {0}")]
    MissingLabel(u32),
    #[error("region geometry out of bounds: {0}")]
    OutOfBounds(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Coarse error class, mapped onto CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Io,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParams(_) => ErrorKind::Usage,
            Error::Io { .. } => ErrorKind::Io,
            Error::Codec(image::ImageError::IoError(_)) => ErrorKind::Io,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => ErrorKind::Io,
            _ => ErrorKind::Data,
        }
    }
}
