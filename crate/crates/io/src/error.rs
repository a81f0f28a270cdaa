use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid header in {path}: {reason} (at byte {offset})")]
    Header {
        path: PathBuf,
        reason: String,
        offset: u64,
    },

    #[error("bad magic in {path}: expected {expected}, found {found} (at byte {offset})")]
    BadMagic {
        path: PathBuf,
        expected: String,
        found: String,
        offset: u64,
    },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found} (payload starts at byte {offset})")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
        offset: u64,
    },

    #[error("{path} referenced by the manifest does not exist")]
    MissingFile { path: PathBuf },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error(transparent)]
    Field(#[from] shiftfield_core::FieldError),

    #[error(transparent)]
    Keypoint(#[from] shiftfield_keypoints::KeypointError),
}

impl IoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        IoError::Json {
            path: path.into(),
            source,
        }
    }
}
