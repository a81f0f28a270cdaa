use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    #[error(transparent)]
    Field(#[from] shiftfield_core::FieldError),

    #[error(transparent)]
    Interp(#[from] shiftfield_interp::InterpError),

    #[error(transparent)]
    Sim(#[from] shiftfield_simgen::SimError),

    #[error(transparent)]
    Keypoint(#[from] shiftfield_keypoints::KeypointError),

    #[error(transparent)]
    Refiner(#[from] shiftfield_refiner::RefinerError),

    #[error(transparent)]
    Metrics(#[from] shiftfield_metrics::MetricsError),

    #[error(transparent)]
    Io(#[from] shiftfield_io::IoError),

    #[error("io error on {path}: {source}")]
    Fs {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn fs(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Fs {
            path: path.into(),
            source,
        }
    }
}

/// Exit codes: 0 success, 2 validation errors (bad config, missing inputs),
/// 1 runtime errors.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Config(_) | CliError::MissingInput(_) => 2,
        CliError::Io(shiftfield_io::IoError::MissingFile { .. }) => 2,
        CliError::Io(shiftfield_io::IoError::Json { .. }) => 2,
        CliError::Io(shiftfield_io::IoError::Header { .. }) => 2,
        CliError::Io(shiftfield_io::IoError::BadMagic { .. }) => 2,
        _ => 1,
    }
}
