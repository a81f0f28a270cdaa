use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("degenerate control points: {0}")]
    Degenerate(String),

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("displacement count {got} does not match point count {want}")]
    DisplacementCount { got: usize, want: usize },

    #[error(transparent)]
    Field(#[from] shiftfield_core::FieldError),
}
