use shiftfield_core::DisplacementField;

use crate::{MetricsError, Result};

fn check_inputs(a: &DisplacementField, b: &DisplacementField, mask: &[bool]) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(shiftfield_core::FieldError::GridMismatch("metric inputs".into()).into());
    }
    if mask.len() != a.grid().voxel_count() {
        return Err(MetricsError::MaskLength {
            got: mask.len(),
            want: a.grid().voxel_count(),
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(MetricsError::EmptyMask);
    }
    Ok(())
}

/// Mean over masked voxels of the squared Euclidean difference `‖φ_a − φ_b‖²`
/// in mm².
pub fn mse(a: &DisplacementField, b: &DisplacementField, mask: &[bool]) -> Result<f64> {
    check_inputs(a, b, mask)?;
    let mut acc = 0.0f64;
    let mut n = 0usize;
    for ((va, vb), &m) in a.vectors().iter().zip(b.vectors()).zip(mask) {
        if m {
            let dx = va[0] - vb[0];
            let dy = va[1] - vb[1];
            let dz = va[2] - vb[2];
            acc += dx * dx + dy * dy + dz * dz;
            n += 1;
        }
    }
    Ok(acc / n as f64)
}

/// Maximum Euclidean difference `‖φ_a − φ_b‖` over masked voxels, in mm.
pub fn max_error(a: &DisplacementField, b: &DisplacementField, mask: &[bool]) -> Result<f64> {
    check_inputs(a, b, mask)?;
    let mut worst = 0.0f64;
    for ((va, vb), &m) in a.vectors().iter().zip(b.vectors()).zip(mask) {
        if m {
            let dx = va[0] - vb[0];
            let dy = va[1] - vb[1];
            let dz = va[2] - vb[2];
            worst = worst.max(dx * dx + dy * dy + dz * dz);
        }
    }
    Ok(worst.sqrt())
}
