use thiserror::Error;

#[derive(Debug, Error)]
pub enum RefinerError {
    #[error("input dims {dims:?} are not divisible by 2^(levels-1) = {divisor}; pad each axis up to the next multiple")]
    IndivisibleDims { dims: [usize; 3], divisor: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid config: {0}")]
    BadConfig(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("empty training set")]
    EmptyTrainSet,

    #[error("keypoint sampling failed after retries: {0}")]
    KeypointSampling(String),

    #[error(transparent)]
    Field(#[from] shiftfield_core::FieldError),

    #[error(transparent)]
    Interp(#[from] shiftfield_interp::InterpError),

    #[error(transparent)]
    Keypoint(#[from] shiftfield_keypoints::KeypointError),

    #[error(transparent)]
    Io(#[from] shiftfield_io::IoError),
}
