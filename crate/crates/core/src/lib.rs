//! Numeric substrate for dense 3D displacement-field processing.
//!
//! Everything here lives in world millimetre coordinates: a [`GridSpec`]
//! maps voxel indices to world points (`origin + index * spacing`), a
//! [`DisplacementField`] stores one 3-vector per voxel, and the map under
//! study is always `x ↦ x + φ(x)`. Scalar math is `f64` throughout.
//!
//! All types are immutable value objects; the per-voxel operations
//! ([`warp_image`], [`warp_mask`], [`jacobian_determinant`], [`mask_field`])
//! never mutate their inputs and parallelize internally over disjoint
//! output voxels.

mod error;
mod field;
mod grid;
mod jacobian;
mod labels;
mod volume;
mod warp;

pub use error::FieldError;
pub use field::DisplacementField;
pub use grid::GridSpec;
pub use jacobian::{det3, jacobian_at, jacobian_determinant, stencil};
pub use labels::{LabelSet, LabelVolume, TissueLabel};
pub use volume::Volume;
pub use warp::{mask_field, warp_image, warp_mask};

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, FieldError>;
