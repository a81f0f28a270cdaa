use rayon::prelude::*;
use shiftfield_core::GridSpec;

use crate::{MetricsError, Result};

/// Boundary voxels of a mask: masked voxels with at least one 6-neighbor
/// outside the mask. Neighbors beyond the grid count as outside, so masked
/// voxels on the volume edge are boundary voxels.
pub fn boundary_voxels(mask: &[bool], grid: &GridSpec) -> Vec<[usize; 3]> {
    let [d, w, h] = grid.dims();
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..w {
            for k in 0..h {
                if !mask[grid.linear(i, j, k)] {
                    continue;
                }
                let mut boundary = false;
                let coords = [i as isize, j as isize, k as isize];
                let dims = [d as isize, w as isize, h as isize];
                'probe: for ax in 0..3 {
                    for step in [-1isize, 1] {
                        let mut n = coords;
                        n[ax] += step;
                        if n[ax] < 0 || n[ax] >= dims[ax] {
                            boundary = true;
                            break 'probe;
                        }
                        if !mask[grid.linear(n[0] as usize, n[1] as usize, n[2] as usize)] {
                            boundary = true;
                            break 'probe;
                        }
                    }
                }
                if boundary {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// 95th-percentile symmetric Hausdorff distance between two masks, in mm.
///
/// Directed distances run from each boundary voxel of one mask to the
/// nearest boundary voxel of the other (world-coordinate Euclidean); each
/// direction takes its nearest-rank 95th percentile (the `ceil(0.95·n)`-th
/// order statistic) and the result is the larger of the two.
pub fn hd95(mask_a: &[bool], mask_b: &[bool], grid: &GridSpec) -> Result<f64> {
    for m in [mask_a, mask_b] {
        if m.len() != grid.voxel_count() {
            return Err(MetricsError::MaskLength {
                got: m.len(),
                want: grid.voxel_count(),
            });
        }
        if !m.iter().any(|&x| x) {
            return Err(MetricsError::EmptyMask);
        }
    }
    let ba = boundary_voxels(mask_a, grid);
    let bb = boundary_voxels(mask_b, grid);
    let d_ab = directed_percentile(&ba, &bb, grid)?;
    let d_ba = directed_percentile(&bb, &ba, grid)?;
    Ok(d_ab.max(d_ba))
}

fn directed_percentile(from: &[[usize; 3]], to: &[[usize; 3]], grid: &GridSpec) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(MetricsError::EmptyMask);
    }
    let index = NearestBoundary::build(to, grid);
    let mut dists: Vec<f64> = from
        .par_iter()
        .map(|v| {
            let p = grid.world(v[0], v[1], v[2]);
            index.nearest_distance_sq(p).sqrt()
        })
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = dists.len();
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    Ok(dists[rank - 1])
}

/// Uniform-bucket spatial index over boundary voxels for exact nearest
/// queries; queries expand Chebyshev rings until no closer cell remains.
struct NearestBoundary {
    cell: f64,
    lo: [f64; 3],
    dims: [usize; 3],
    buckets: Vec<Vec<[f64; 3]>>,
}

impl NearestBoundary {
    fn build(voxels: &[[usize; 3]], grid: &GridSpec) -> Self {
        let pts: Vec<[f64; 3]> = voxels
            .iter()
            .map(|v| grid.world(v[0], v[1], v[2]))
            .collect();
        let cell = grid.spacing().iter().cloned().fold(0.0f64, f64::max) * 2.0;
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &pts {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let dims = [
            ((hi[0] - lo[0]) / cell).floor() as usize + 1,
            ((hi[1] - lo[1]) / cell).floor() as usize + 1,
            ((hi[2] - lo[2]) / cell).floor() as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for p in pts {
            let c = Self::cell_of_static(p, lo, cell, dims);
            buckets[(c[0] * dims[1] + c[1]) * dims[2] + c[2]].push(p);
        }
        Self {
            cell,
            lo,
            dims,
            buckets,
        }
    }

    fn cell_of_static(p: [f64; 3], lo: [f64; 3], cell: f64, dims: [usize; 3]) -> [usize; 3] {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let x = ((p[a] - lo[a]) / cell).floor();
            c[a] = (x.max(0.0) as usize).min(dims[a] - 1);
        }
        c
    }

    fn nearest_distance_sq(&self, p: [f64; 3]) -> f64 {
        let c = Self::cell_of_static(p, self.lo, self.cell, self.dims);
        let max_ring = self.dims.iter().max().copied().unwrap_or(1);
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            // once a hit exists, stop when the next ring cannot beat it
            if best.is_finite() {
                let ring_min = (ring as f64 - 1.0).max(0.0) * self.cell;
                if ring_min * ring_min > best {
                    break;
                }
            }
            self.for_ring_cells(c, ring, |bucket| {
                for q in bucket {
                    let dx = p[0] - q[0];
                    let dy = p[1] - q[1];
                    let dz = p[2] - q[2];
                    let d2 = dx * dx + dy * dy + dz * dz;
                    if d2 < best {
                        best = d2;
                    }
                }
            });
        }
        best
    }

    fn for_ring_cells(&self, center: [usize; 3], ring: usize, mut f: impl FnMut(&[[f64; 3]])) {
        let r = ring as isize;
        let c = [center[0] as isize, center[1] as isize, center[2] as isize];
        let dims = [
            self.dims[0] as isize,
            self.dims[1] as isize,
            self.dims[2] as isize,
        ];
        for x in (c[0] - r).max(0)..=(c[0] + r).min(dims[0] - 1) {
            for y in (c[1] - r).max(0)..=(c[1] + r).min(dims[1] - 1) {
                for z in (c[2] - r).max(0)..=(c[2] + r).min(dims[2] - 1) {
                    let cheb = (x - c[0]).abs().max((y - c[1]).abs()).max((z - c[2]).abs());
                    if cheb != r {
                        continue;
                    }
                    f(&self.buckets[((x * dims[1] + y) * dims[2] + z) as usize]);
                }
            }
        }
    }
}
