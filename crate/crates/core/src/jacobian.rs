use rayon::prelude::*;

use crate::{DisplacementField, FieldError, Result, Volume};

/// Per-voxel determinant of the Jacobian of `x ↦ x + φ(x)`.
///
/// Partial derivatives of φ use central differences in the interior and
/// first-order one-sided differences on the boundary slabs, scaled by the
/// voxel spacing; the identity part contributes the 3×3 identity matrix.
/// Central differences are exact for affine fields, so affine φ yields
/// `det(I + A)` at every interior voxel.
pub fn jacobian_determinant(field: &DisplacementField) -> Result<Volume> {
    let grid = field.grid().clone();
    let dims = grid.dims();
    if dims.iter().any(|&d| d < 3) {
        return Err(FieldError::GridTooSmall(format!(
            "jacobian_determinant needs dims >= 3 per axis, got {dims:?}"
        )));
    }
    let [_, w, h] = dims;
    let plane = w * h;
    let mut out = vec![0.0f64; grid.voxel_count()];
    out.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
        for j in 0..w {
            for k in 0..h {
                let jac = jacobian_at(field, [i, j, k]);
                slab[j * h + k] = det3(&jac);
            }
        }
    });
    Ok(Volume::from_parts_unchecked(grid, out))
}

/// The full 3×3 Jacobian `J[a][b] = δ_ab + ∂φ_a/∂x_b` at one voxel, using the
/// same stencils as [`jacobian_determinant`]. Exposed so loss adjoints can
/// mirror the scheme exactly.
pub fn jacobian_at(field: &DisplacementField, v: [usize; 3]) -> [[f64; 3]; 3] {
    let grid = field.grid();
    let dims = grid.dims();
    let spacing = grid.spacing();
    let mut jac = [[0.0f64; 3]; 3];
    for b in 0..3 {
        let (lo, hi, scale) = stencil(v[b], dims[b], spacing[b]);
        let mut vlo = v;
        let mut vhi = v;
        vlo[b] = lo;
        vhi[b] = hi;
        let flo = field.get(vlo[0], vlo[1], vlo[2]);
        let fhi = field.get(vhi[0], vhi[1], vhi[2]);
        for a in 0..3 {
            jac[a][b] = (fhi[a] - flo[a]) * scale;
        }
    }
    for a in 0..3 {
        jac[a][a] += 1.0;
    }
    jac
}

/// Difference stencil along one axis: the low/high sample indices and the
/// reciprocal step. Interior voxels get central differences, boundary voxels
/// one-sided ones.
#[inline]
pub fn stencil(pos: usize, dim: usize, spacing: f64) -> (usize, usize, f64) {
    if pos == 0 {
        (0, 1, 1.0 / spacing)
    } else if pos == dim - 1 {
        (dim - 2, dim - 1, 1.0 / spacing)
    } else {
        (pos - 1, pos + 1, 1.0 / (2.0 * spacing))
    }
}

#[inline]
pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
