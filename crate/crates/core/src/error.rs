use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the FTNS tensor container.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("rank {0} outside 1..=4")]
    BadRank(u8),
    #[error("zero-length dimension in {0:?}")]
    ZeroDim(Vec<usize>),
    #[error("truncated input: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
}

/// Dataset manifest/annotation problems.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("annotation references unknown video_id `{0}`")]
    UnknownVideo(String),
    #[error("duplicate video_id `{0}` in manifest")]
    DuplicateVideo(String),
    #[error("video `{video_id}` has no frames")]
    EmptyVideo { video_id: String },
    #[error("video `{video_id}` shot {shot} annotated more than once")]
    DuplicateShot { video_id: String, shot: usize },
    #[error("video `{video_id}` needs {expected} shot scores for {frames} frames, found {found}")]
    ShotCount {
        video_id: String,
        frames: usize,
        expected: usize,
        found: usize,
    },
    #[error("video `{video_id}` shot {shot} score {score} outside [0, {max}]")]
    ScoreRange {
        video_id: String,
        shot: usize,
        score: f64,
        max: f64,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("validation error: {0}")]
    Dataset(#[from] DatasetError),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("state error: {0}")]
    State(String),
    #[error("format error in {path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
