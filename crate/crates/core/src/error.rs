use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid labels: {0}")]
    Labels(String),

    #[error("missing label for frame {0}")]
    MissingLabel(u64),

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("no frames to process")]
    NoFrames,

    #[error("detection for frame {0} carries no ROI result")]
    MissingRoi(u64),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
