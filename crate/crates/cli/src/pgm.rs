use std::path::Path;

use shiftfield_core::Volume;

use crate::{CliError, Result};

/// Debug aid: writes the middle axial slice (axis 0) as an 8-bit PGM.
pub fn dump_mid_slice(vol: &Volume, path: &Path) -> Result<()> {
    let [d, w, h] = vol.grid().dims();
    let i = d / 2;
    let (lo, hi) = vol.min_max();
    let range = (hi - lo).max(1e-12);
    let mut bytes = format!("P5\n{h} {w}\n255\n").into_bytes();
    for j in 0..w {
        for k in 0..h {
            let v = (vol.get(i, j, k) - lo) / range;
            bytes.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    std::fs::write(path, bytes).map_err(|e| CliError::fs(path, e))
}
