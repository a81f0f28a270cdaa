use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("grid too small for a phantom: {0}")]
    GridTooSmall(String),

    #[error("invalid simulation parameters: {0}")]
    BadParams(String),

    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),

    #[error(transparent)]
    Field(#[from] shiftfield_core::FieldError),

    #[error(transparent)]
    Io(#[from] shiftfield_io::IoError),
}
