use shiftfield_core::Volume;

use crate::scale_space::{build_octave, decimate};

const OCTAVES: usize = 3;
const INTERVALS: usize = 3;
const SIGMA0: f64 = 0.8;

/// Default contrast threshold: 2% of the image intensity range.
pub fn default_contrast_threshold(img: &Volume) -> f64 {
    let (lo, hi) = img.min_max();
    0.02 * (hi - lo)
}

/// Difference-of-Gaussians keypoint detection inside a brain mask.
///
/// Builds a 3-octave scale-space (σ doubling per octave, 3 intervals per
/// octave, base σ 0.8 voxels) and returns the world coordinates of voxels
/// that are strict extrema over their 3×3×3×3 space-scale neighborhood with
/// `|DoG| ≥ contrast_threshold`, restricted to `brain_mask`. Results are
/// sorted by |DoG| descending with ties broken by full-resolution voxel
/// index. The same structure detected in neighboring octaves lands on
/// nearly the same voxel, so detections within a Chebyshev radius of 2 of a
/// stronger one are suppressed.
pub fn detect_keypoints(
    img: &Volume,
    brain_mask: &[bool],
    contrast_threshold: f64,
) -> Vec<[f64; 3]> {
    let grid = img.grid();
    let full_dims = grid.dims();
    assert_eq!(brain_mask.len(), grid.voxel_count());

    let mut found: Vec<(f64, usize, [usize; 3])> = Vec::new(); // (|dog|, full-res index, voxel)
    let mut base = img.data().to_vec();
    let mut dims = full_dims;
    let mut stride = 1usize;
    for _ in 0..OCTAVES {
        if dims.iter().any(|&d| d < 8) {
            break;
        }
        let octave = build_octave(&base, dims, stride, SIGMA0, INTERVALS);
        scan_octave(&octave, brain_mask, full_dims, contrast_threshold, &mut found);
        let (next, nd) = decimate(&octave.next_base, dims);
        base = next;
        dims = nd;
        stride *= 2;
    }

    // strongest response first; ties by voxel index for determinism
    found.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite dog values")
            .then(a.1.cmp(&b.1))
    });
    // cross-octave duplicate suppression: greedy non-maximum keep within a
    // Chebyshev radius of 2 voxels
    let mut kept: Vec<[usize; 3]> = Vec::new();
    let mut out = Vec::with_capacity(found.len());
    for (_, _, v) in found {
        let close = kept.iter().any(|u| {
            u[0].abs_diff(v[0]) <= 2 && u[1].abs_diff(v[1]) <= 2 && u[2].abs_diff(v[2]) <= 2
        });
        if !close {
            kept.push(v);
            out.push(grid.world(v[0], v[1], v[2]));
        }
    }
    out
}

fn scan_octave(
    octave: &crate::scale_space::Octave,
    brain_mask: &[bool],
    full_dims: [usize; 3],
    threshold: f64,
    found: &mut Vec<(f64, usize, [usize; 3])>,
) {
    let [d, w, h] = octave.dims;
    let stride = octave.stride;
    let idx = |i: usize, j: usize, k: usize| (i * w + j) * h + k;
    for s in 1..octave.dogs.len() - 1 {
        let prev = &octave.dogs[s - 1];
        let curr = &octave.dogs[s];
        let next = &octave.dogs[s + 1];
        for i in 1..d - 1 {
            for j in 1..w - 1 {
                for k in 1..h - 1 {
                    let v = curr[idx(i, j, k)];
                    if v.abs() < threshold {
                        continue;
                    }
                    // full-resolution location and mask check
                    let fi = i * stride;
                    let fj = j * stride;
                    let fk = k * stride;
                    if fi >= full_dims[0] || fj >= full_dims[1] || fk >= full_dims[2] {
                        continue;
                    }
                    let full_idx = (fi * full_dims[1] + fj) * full_dims[2] + fk;
                    if !brain_mask[full_idx] {
                        continue;
                    }
                    if is_strict_extremum(v, prev, curr, next, [i, j, k], [w, h]) {
                        found.push((v.abs(), full_idx, [fi, fj, fk]));
                    }
                }
            }
        }
    }
}

/// Strict extremum over the 80 space-scale neighbors.
#[inline]
fn is_strict_extremum(
    v: f64,
    prev: &[f64],
    curr: &[f64],
    next: &[f64],
    at: [usize; 3],
    [w, h]: [usize; 2],
) -> bool {
    let idx = |i: usize, j: usize, k: usize| (i * w + j) * h + k;
    let mut is_max = true;
    let mut is_min = true;
    for di in -1isize..=1 {
        for dj in -1isize..=1 {
            for dk in -1isize..=1 {
                let i = (at[0] as isize + di) as usize;
                let j = (at[1] as isize + dj) as usize;
                let k = (at[2] as isize + dk) as usize;
                let o = idx(i, j, k);
                let center = di == 0 && dj == 0 && dk == 0;
                for (level, skip_center) in [(prev, false), (curr, true), (next, false)] {
                    if center && skip_center {
                        continue;
                    }
                    let u = level[o];
                    if v <= u {
                        is_max = false;
                    }
                    if v >= u {
                        is_min = false;
                    }
                    if !is_max && !is_min {
                        return false;
                    }
                }
            }
        }
    }
    is_max || is_min
}
