use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, QuiltError>;

#[derive(Debug, Error)]
pub enum QuiltError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt image data: {0}")]
    CorruptData(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("source image {width}x{height} is too small for {patch}x{patch} blocks")]
    SourceTooSmall {
        width: usize,
        height: usize,
        patch: usize,
    },

    #[error("error surface is empty")]
    EmptySurface,

    #[error("overlap/surface mismatch: {0}")]
    SpecMismatch(String),

    #[error("image has no pixels")]
    EmptyImage,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("montage needs at least one image")]
    EmptyList,

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("run directory already exists: {0}")]
    RunExists(PathBuf),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl QuiltError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        QuiltError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by caller-supplied parameters rather than by
    /// the environment or input data.
    pub fn is_usage(&self) -> bool {
        matches!(self, QuiltError::InvalidConfig(_))
    }
}
