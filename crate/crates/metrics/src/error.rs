use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mask is empty")]
    EmptyMask,

    #[error("mask length {got} does not match voxel count {want}")]
    MaskLength { got: usize, want: usize },

    #[error("all paired differences are zero; the signed-rank test is undefined")]
    AllZeroDifferences,

    #[error("only {n} non-zero differences; at least 5 are required")]
    TooFewDifferences { n: usize },

    #[error("paired lists have different lengths: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },

    #[error(transparent)]
    Field(#[from] shiftfield_core::FieldError),
}
