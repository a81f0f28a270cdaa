use rayon::prelude::*;
use shiftfield_core::{DisplacementField, GridSpec};

use crate::{InterpError, Result, Tetrahedralization};

/// Piecewise-linear interpolation of per-point displacements over a
/// tetrahedralization.
///
/// Every voxel center inside the convex hull blends the four vertex
/// displacements of its containing tet with barycentric weights; voxel
/// centers outside the hull get the zero vector. `displacements` must match
/// the tetrahedralization's (deduplicated) point list.
pub fn linear_interpolate(
    tets: &Tetrahedralization,
    displacements: &[[f64; 3]],
    grid: &GridSpec,
) -> Result<DisplacementField> {
    if displacements.len() != tets.points().len() {
        return Err(InterpError::DisplacementCount {
            got: displacements.len(),
            want: tets.points().len(),
        });
    }
    let [_, w, h] = grid.dims();
    let plane = w * h;
    let mut vectors = vec![[0.0f64; 3]; grid.voxel_count()];
    vectors
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(i, slab)| {
            // warm-start the walk from the previous voxel in this slab
            let mut hint = 0usize;
            for j in 0..w {
                for k in 0..h {
                    let p = grid.world(i, j, k);
                    if let Some((t, lam)) = tets.locate(p, hint) {
                        hint = t;
                        let verts = tets.tets()[t];
                        let mut v = [0.0f64; 3];
                        for (slot, &vi) in verts.iter().enumerate() {
                            let d = displacements[vi];
                            v[0] += lam[slot] * d[0];
                            v[1] += lam[slot] * d[1];
                            v[2] += lam[slot] * d[2];
                        }
                        slab[j * h + k] = v;
                    }
                }
            }
        });
    Ok(DisplacementField::new(grid.clone(), vectors)?)
}
