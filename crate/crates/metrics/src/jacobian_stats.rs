use shiftfield_core::{jacobian_determinant, DisplacementField};

use crate::{MetricsError, Result};

/// Which determinant values count as folded.
///
/// The default counts non-positive values (`det ≤ 0`); the strict mode
/// counts only negative ones (`det < 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianCount {
    #[default]
    NonPositive,
    StrictNegative,
}

/// Percentage of masked interior voxels whose Jacobian determinant of
/// `x ↦ x + φ(x)` is folded under `mode`.
///
/// Boundary slabs are excluded before counting: one-sided stencils there are
/// first-order only, so their determinants are left out of the statistics.
pub fn pct_nonpositive_jacobian(
    field: &DisplacementField,
    mask: &[bool],
    mode: JacobianCount,
) -> Result<f64> {
    let grid = field.grid();
    if mask.len() != grid.voxel_count() {
        return Err(MetricsError::MaskLength {
            got: mask.len(),
            want: grid.voxel_count(),
        });
    }
    let det = jacobian_determinant(field)?;
    let [d, w, h] = grid.dims();
    let mut total = 0usize;
    let mut folded = 0usize;
    for i in 1..d - 1 {
        for j in 1..w - 1 {
            for k in 1..h - 1 {
                let idx = grid.linear(i, j, k);
                if !mask[idx] {
                    continue;
                }
                total += 1;
                let v = det.data()[idx];
                let hit = match mode {
                    JacobianCount::NonPositive => v <= 0.0,
                    JacobianCount::StrictNegative => v < 0.0,
                };
                if hit {
                    folded += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(100.0 * folded as f64 / total as f64)
}
