use shiftfield_core::{DisplacementField, GridSpec, LabelVolume, Volume};

use crate::Result;

/// Next multiple of `divisor` for each dim.
pub fn padded_dims(dims: [usize; 3], divisor: usize) -> [usize; 3] {
    let up = |d: usize| d.div_ceil(divisor) * divisor;
    [up(dims[0]), up(dims[1]), up(dims[2])]
}

fn padded_grid(grid: &GridSpec, divisor: usize) -> Result<GridSpec> {
    Ok(GridSpec::new(
        padded_dims(grid.dims(), divisor),
        grid.spacing(),
        grid.origin(),
    )?)
}

fn copy_into<T: Copy + Default>(
    src: &[T],
    src_dims: [usize; 3],
    dst_dims: [usize; 3],
) -> Vec<T> {
    let mut out = vec![T::default(); dst_dims[0] * dst_dims[1] * dst_dims[2]];
    for i in 0..src_dims[0] {
        for j in 0..src_dims[1] {
            let src_row = (i * src_dims[1] + j) * src_dims[2];
            let dst_row = (i * dst_dims[1] + j) * dst_dims[2];
            out[dst_row..dst_row + src_dims[2]]
                .copy_from_slice(&src[src_row..src_row + src_dims[2]]);
        }
    }
    out
}

fn crop_from<T: Copy + Default>(
    src: &[T],
    src_dims: [usize; 3],
    dst_dims: [usize; 3],
) -> Vec<T> {
    let mut out = vec![T::default(); dst_dims[0] * dst_dims[1] * dst_dims[2]];
    for i in 0..dst_dims[0] {
        for j in 0..dst_dims[1] {
            let src_row = (i * src_dims[1] + j) * src_dims[2];
            let dst_row = (i * dst_dims[1] + j) * dst_dims[2];
            out[dst_row..dst_row + dst_dims[2]]
                .copy_from_slice(&src[src_row..src_row + dst_dims[2]]);
        }
    }
    out
}

/// Zero-pads a volume up to the next multiple of `divisor` per axis; the
/// origin and spacing are unchanged, so original voxels keep their world
/// coordinates.
pub fn pad_volume(vol: &Volume, divisor: usize) -> Result<Volume> {
    let grid = padded_grid(vol.grid(), divisor)?;
    if grid.dims() == vol.grid().dims() {
        return Ok(vol.clone());
    }
    let data = copy_into(vol.data(), vol.grid().dims(), grid.dims());
    Ok(Volume::new(grid, data)?)
}

/// Background-pads a label volume.
pub fn pad_labels(labels: &LabelVolume, divisor: usize) -> Result<LabelVolume> {
    let grid = padded_grid(labels.grid(), divisor)?;
    if grid.dims() == labels.grid().dims() {
        return Ok(labels.clone());
    }
    let data = copy_into(labels.labels(), labels.grid().dims(), grid.dims());
    Ok(LabelVolume::new(grid, data)?)
}

/// Zero-pads a displacement field.
pub fn pad_field(field: &DisplacementField, divisor: usize) -> Result<DisplacementField> {
    let grid = padded_grid(field.grid(), divisor)?;
    if grid.dims() == field.grid().dims() {
        return Ok(field.clone());
    }
    let data = copy_into(field.vectors(), field.grid().dims(), grid.dims());
    Ok(DisplacementField::new(grid, data)?)
}

/// Crops a padded field back to the original grid.
pub fn strip_field(field: &DisplacementField, original: &GridSpec) -> Result<DisplacementField> {
    if field.grid().dims() == original.dims() {
        return Ok(field.clone());
    }
    let data = crop_from(field.vectors(), field.grid().dims(), original.dims());
    Ok(DisplacementField::new(original.clone(), data)?)
}
