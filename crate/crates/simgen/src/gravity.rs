use rand::{Rng, RngExt};
use shiftfield_core::{LabelSet, TissueLabel};

use crate::{Phantom, Result, SimError};

/// The craniotomy site: the outer brain-surface voxel nearest the tumor
/// center, and the unit direction from the tumor toward it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessSite {
    /// World coordinates (mm) of the surface voxel center.
    pub point: [f64; 3],
    /// Unit vector from the tumor center toward the surface point.
    pub direction: [f64; 3],
}

/// Finds the brain-surface voxel (brain or CSF voxel 6-adjacent to skull)
/// nearest to the tumor center; distance ties resolve to the smallest linear
/// voxel index. This assumes surgeons choose the shortest access path, so
/// the patient is positioned with the craniotomy up and gravity acts along
/// the access direction.
pub fn access_site(phantom: &Phantom) -> Result<AccessSite> {
    let labels = &phantom.labels;
    let grid = labels.grid();
    let [d, w, h] = grid.dims();
    let brain = LabelSet::BRAIN;
    let mut best: Option<(f64, usize, [usize; 3])> = None;
    for i in 0..d {
        for j in 0..w {
            for k in 0..h {
                let idx = grid.linear(i, j, k);
                if !brain.contains_code(labels.labels()[idx]) {
                    continue;
                }
                let mut touches_skull = false;
                let coords = [i as isize, j as isize, k as isize];
                let dims = [d as isize, w as isize, h as isize];
                'probe: for ax in 0..3 {
                    for s in [-1isize, 1] {
                        let mut q = coords;
                        q[ax] += s;
                        if q[ax] < 0 || q[ax] >= dims[ax] {
                            continue;
                        }
                        let qi = grid.linear(q[0] as usize, q[1] as usize, q[2] as usize);
                        if labels.labels()[qi] == TissueLabel::Skull.code() {
                            touches_skull = true;
                            break 'probe;
                        }
                    }
                }
                if !touches_skull {
                    continue;
                }
                let p = grid.world(i, j, k);
                let d2 = (p[0] - phantom.tumor_center[0]).powi(2)
                    + (p[1] - phantom.tumor_center[1]).powi(2)
                    + (p[2] - phantom.tumor_center[2]).powi(2);
                let better = match &best {
                    None => true,
                    Some((bd, bidx, _)) => d2 < *bd || (d2 == *bd && idx < *bidx),
                };
                if better {
                    best = Some((d2, idx, [i, j, k]));
                }
            }
        }
    }
    let (_, _, v) = best.ok_or_else(|| {
        SimError::InvalidPhantom("no brain-surface voxel adjacent to skull".into())
    })?;
    let point = grid.world(v[0], v[1], v[2]);
    let delta = [
        point[0] - phantom.tumor_center[0],
        point[1] - phantom.tumor_center[1],
        point[2] - phantom.tumor_center[2],
    ];
    let norm = (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt();
    if norm == 0.0 {
        return Err(SimError::InvalidPhantom(
            "tumor center coincides with the surface point".into(),
        ));
    }
    Ok(AccessSite {
        point,
        direction: [delta[0] / norm, delta[1] / norm, delta[2] / norm],
    })
}

/// Base gravity direction: from the tumor center toward the nearest brain
/// surface point.
pub fn estimate_gravity(phantom: &Phantom) -> Result<[f64; 3]> {
    Ok(access_site(phantom)?.direction)
}

/// Perturbs a unit vector by three rotations about the world axes, each by
/// an independent uniform angle in `[-max_deg, +max_deg]`, composed in fixed
/// x→y→z order. `max_deg = 0` returns the input unchanged.
pub fn perturb_gravity<R: Rng + ?Sized>(g: [f64; 3], max_deg: f64, rng: &mut R) -> [f64; 3] {
    if max_deg == 0.0 {
        return g;
    }
    let ang: Vec<f64> = (0..3)
        .map(|_| rng.random_range(-max_deg..=max_deg).to_radians())
        .collect();
    let mut v = rotate_axis(g, 0, ang[0]);
    v = rotate_axis(v, 1, ang[1]);
    v = rotate_axis(v, 2, ang[2]);
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn rotate_axis(v: [f64; 3], axis: usize, angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut out = v;
    out[a] = c * v[a] - s * v[b];
    out[b] = s * v[a] + c * v[b];
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use shiftfield_core::{GridSpec, LabelVolume, Volume};

    /// Hand-built spherical brain with layered CSF/skull shells.
    fn sphere_phantom(tumor_offset: [f64; 3]) -> Phantom {
        let g = GridSpec::isotropic([33, 33, 33]).unwrap();
        let c = [16.0, 16.0, 16.0];
        let mut labels = vec![0u8; g.voxel_count()];
        for idx in 0..g.voxel_count() {
            let [i, j, k] = g.unravel(idx);
            let r = ((i as f64 - c[0]).powi(2)
                + (j as f64 - c[1]).powi(2)
                + (k as f64 - c[2]).powi(2))
            .sqrt();
            labels[idx] = if r <= 10.0 {
                3
            } else if r <= 11.5 {
                2
            } else if r <= 13.0 {
                1
            } else {
                0
            };
        }
        let tumor_center = [
            c[0] + tumor_offset[0],
            c[1] + tumor_offset[1],
            c[2] + tumor_offset[2],
        ];
        // mark a small tumor ball so the phantom is structurally complete
        for idx in 0..g.voxel_count() {
            let [i, j, k] = g.unravel(idx);
            let r = ((i as f64 - tumor_center[0]).powi(2)
                + (j as f64 - tumor_center[1]).powi(2)
                + (k as f64 - tumor_center[2]).powi(2))
            .sqrt();
            if r <= 2.0 && labels[idx] == 3 {
                labels[idx] = 5;
            }
        }
        Phantom {
            image: Volume::filled(g.clone(), 0.5).unwrap(),
            labels: LabelVolume::new(g, labels).unwrap(),
            tumor_center,
        }
    }

    #[test]
    fn offset_tumor_points_gravity_along_offset_axis() {
        let p = sphere_phantom([5.0, 0.0, 0.0]);
        let gvec = estimate_gravity(&p).unwrap();
        // within a one-voxel angular tolerance of +x
        let cos = gvec[0];
        let surface_dist = 6.5; // ~ distance from tumor to surface
        let tol = (1.0f64 / surface_dist).atan();
        assert!(cos >= tol.cos(), "gravity {gvec:?} not along +x");
    }

    #[test]
    fn matches_exhaustive_surface_search() {
        let p = sphere_phantom([3.0, -2.0, 4.0]);
        let site = access_site(&p).unwrap();
        // exhaustive oracle over all brain/CSF voxels adjacent to skull
        let g = p.labels.grid();
        let [d, w, h] = g.dims();
        let mut best: Option<(f64, usize)> = None;
        for i in 0..d {
            for j in 0..w {
                for k in 0..h {
                    let idx = g.linear(i, j, k);
                    let code = p.labels.labels()[idx];
                    if !(2..=5).contains(&code) {
                        continue;
                    }
                    let mut touches = false;
                    for (ax, s) in [(0i32, -1i32), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)] {
                        let mut q = [i as i32, j as i32, k as i32];
                        q[ax as usize] += s;
                        if q[0] < 0 || q[1] < 0 || q[2] < 0 {
                            continue;
                        }
                        let (qi, qj, qk) = (q[0] as usize, q[1] as usize, q[2] as usize);
                        if qi >= d || qj >= w || qk >= h {
                            continue;
                        }
                        if p.labels.get(qi, qj, qk) == 1 {
                            touches = true;
                        }
                    }
                    if !touches {
                        continue;
                    }
                    let pw = g.world(i, j, k);
                    let d2 = (0..3)
                        .map(|a| (pw[a] - p.tumor_center[a]).powi(2))
                        .sum::<f64>();
                    if best.map(|(bd, bi)| d2 < bd || (d2 == bd && idx < bi)).unwrap_or(true) {
                        best = Some((d2, idx));
                    }
                }
            }
        }
        let (_, oracle_idx) = best.unwrap();
        let [oi, oj, ok] = g.unravel(oracle_idx);
        assert_eq!(site.point, g.world(oi, oj, ok));
    }

    #[test]
    fn centered_tumor_is_deterministic() {
        let p = sphere_phantom([0.0, 0.0, 0.0]);
        let a = estimate_gravity(&p).unwrap();
        let b = estimate_gravity(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let g = [0.6, -0.64, 0.48];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = perturb_gravity(g, 0.0, &mut rng);
        assert_eq!(out, g);
    }

    #[test]
    fn perturbation_stays_unit_and_within_angle_bound() {
        let g = [0.0, 0.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let max_deg = 10.0f64;
        for _ in 0..10_000 {
            let v = perturb_gravity(g, max_deg, &mut rng);
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            let dot = (v[0] * g[0] + v[1] * g[1] + v[2] * g[2]).clamp(-1.0, 1.0);
            let angle = dot.acos().to_degrees();
            // three axis rotations of up to max_deg each bound the total
            assert!(angle <= 3.0 * max_deg + 1e-9, "angle {angle}");
        }
    }

    #[test]
    fn perturbation_reproducible_for_fixed_seed() {
        let g = [0.6, -0.64, 0.48];
        let a = perturb_gravity(g, 10.0, &mut ChaCha8Rng::seed_from_u64(31));
        let b = perturb_gravity(g, 10.0, &mut ChaCha8Rng::seed_from_u64(31));
        assert_eq!(a, b);
    }
}
