use rayon::prelude::*;

use crate::{DisplacementField, LabelSet, LabelVolume, Result, Volume};

/// Pull-back warp of a scalar image by `x ↦ x + φ(x)`.
///
/// The output voxel at world point `x` takes the value of `img` sampled
/// trilinearly at `x + φ(x)`; samples falling outside the grid read as zero.
/// With the zero field the input is returned bit-exactly.
pub fn warp_image(img: &Volume, field: &DisplacementField) -> Result<Volume> {
    img.grid().expect_matches(field.grid(), "warp_image")?;
    let grid = img.grid().clone();
    let [dw, ww, hw] = grid.dims();
    let spacing = grid.spacing();
    let mut out = vec![0.0f64; grid.voxel_count()];
    let plane = ww * hw;
    out.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
        for j in 0..ww {
            for k in 0..hw {
                let idx = (i * ww + j) * hw + k;
                let d = field.vectors()[idx];
                // sample in index space: u = index + d / spacing, which is
                // exact (no round trip through world coordinates) when d = 0
                let u = [
                    i as f64 + d[0] / spacing[0],
                    j as f64 + d[1] / spacing[1],
                    k as f64 + d[2] / spacing[2],
                ];
                slab[j * hw + k] = img.sample_index(u);
            }
        }
    });
    let _ = dw;
    Ok(Volume::from_parts_unchecked(grid, out))
}

/// Nearest-neighbor pull-back warp of a label volume.
///
/// The label at `x` is taken from the voxel nearest to `x + φ(x)`;
/// out-of-bounds lookups become background.
pub fn warp_mask(mask: &LabelVolume, field: &DisplacementField) -> Result<LabelVolume> {
    mask.grid().expect_matches(field.grid(), "warp_mask")?;
    let grid = mask.grid().clone();
    let [_, ww, hw] = grid.dims();
    let dims = grid.dims();
    let spacing = grid.spacing();
    let mut out = vec![0u8; grid.voxel_count()];
    let plane = ww * hw;
    out.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
        for j in 0..ww {
            for k in 0..hw {
                let idx = (i * ww + j) * hw + k;
                let d = field.vectors()[idx];
                let u = [
                    i as f64 + d[0] / spacing[0],
                    j as f64 + d[1] / spacing[1],
                    k as f64 + d[2] / spacing[2],
                ];
                let mut nn = [0usize; 3];
                let mut inside = true;
                for a in 0..3 {
                    let r = u[a].round();
                    if r < 0.0 || r > (dims[a] - 1) as f64 {
                        inside = false;
                        break;
                    }
                    nn[a] = r as usize;
                }
                slab[j * hw + k] = if inside {
                    mask.labels()[(nn[0] * ww + nn[1]) * hw + nn[2]]
                } else {
                    0
                };
            }
        }
    });
    Ok(LabelVolume::from_parts_unchecked(grid, out))
}

/// Zeroes field vectors on voxels whose label is in `zero`; all other voxels
/// pass through unchanged. Idempotent.
pub fn mask_field(
    field: &DisplacementField,
    labels: &LabelVolume,
    zero: LabelSet,
) -> Result<DisplacementField> {
    field.grid().expect_matches(labels.grid(), "mask_field")?;
    let vectors = field
        .vectors()
        .iter()
        .zip(labels.labels())
        .map(|(v, &c)| if zero.contains_code(c) { [0.0; 3] } else { *v })
        .collect();
    Ok(DisplacementField::from_parts_unchecked(
        field.grid().clone(),
        vectors,
    ))
}
