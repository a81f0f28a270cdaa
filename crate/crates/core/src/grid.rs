use serde::{Deserialize, Serialize};

use crate::{FieldError, Result};

/// Regular 3D voxel grid in world millimetre coordinates.
///
/// `dims` is `(D, W, H)` and data indexed by this grid is stored row-major
/// with the last axis (`H`) fastest: `linear(i, j, k) = (i * W + j) * H + k`.
/// The world coordinate of the center of voxel `(i, j, k)` is
/// `origin + (i, j, k) * spacing` componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
}

impl GridSpec {
    /// Builds a grid, validating that every dim is at least 2 and every
    /// spacing is positive and finite.
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(FieldError::InvalidGrid(format!(
                "dims {dims:?} must all be >= 2"
            )));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(FieldError::InvalidGrid(format!(
                "spacing {spacing:?} must be positive and finite"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(FieldError::InvalidGrid(format!(
                "origin {origin:?} must be finite"
            )));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    /// Isotropic 1 mm grid with origin at zero.
    pub fn isotropic(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Row-major linear index, `H` fastest.
    #[inline]
    pub fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    /// Inverse of [`GridSpec::linear`].
    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let rest = idx / self.dims[2];
        let j = rest % self.dims[1];
        let i = rest / self.dims[1];
        [i, j, k]
    }

    /// World coordinate (mm) of the voxel center.
    #[inline]
    pub fn world(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }

    /// Continuous voxel-index coordinates of a world point.
    #[inline]
    pub fn world_to_index(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.spacing[0],
            (p[1] - self.origin[1]) / self.spacing[1],
            (p[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    /// True when continuous index coordinates lie inside the sampled domain
    /// `[0, dim-1]` on every axis.
    #[inline]
    pub fn index_in_bounds(&self, u: [f64; 3]) -> bool {
        (0..3).all(|a| u[a] >= 0.0 && u[a] <= (self.dims[a] - 1) as f64)
    }

    /// True when a world point lies inside the sampled domain.
    pub fn world_in_bounds(&self, p: [f64; 3]) -> bool {
        self.index_in_bounds(self.world_to_index(p))
    }

    /// Errors with a description when two grids differ in any field.
    pub fn expect_matches(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self != other {
            return Err(FieldError::GridMismatch(format!(
                "{what}: {:?}/{:?}/{:?} vs {:?}/{:?}/{:?}",
                self.dims, self.spacing, self.origin, other.dims, other.spacing, other.origin
            )));
        }
        Ok(())
    }
}
