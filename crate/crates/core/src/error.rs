use thiserror::Error;

/// Errors raised by grid, volume and field operations.
#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("data length {got} does not match expected {want}")]
    DataLength { got: usize, want: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid label code {0} (codes 0..=5 are defined)")]
    InvalidLabel(u8),

    #[error("grid too small: {0}")]
    GridTooSmall(String),
}
