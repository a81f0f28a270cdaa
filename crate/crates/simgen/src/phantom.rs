use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shiftfield_core::{GridSpec, LabelVolume, TissueLabel, Volume};

use crate::{Result, SimError};

/// Synthetic preoperative case: a T1-like intensity volume, a tissue label
/// map and the tumor center in world mm.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: Volume,
    pub labels: LabelVolume,
    pub tumor_center: [f64; 3],
}

/// Deterministic-in-seed procedural phantom.
///
/// Anatomy is layered on the voxel lattice: an ellipsoidal parenchyma with
/// randomized semi-axes, a 1–2 voxel CSF rim grown by 6-connected dilation,
/// a 1–2 voxel skull shell grown the same way (which closes the skull by
/// construction), and a spherical tumor core with an edema collar at a
/// randomized off-center location. Intensities are piecewise-constant per
/// tissue with smooth low-frequency modulation and mild noise.
pub fn make_phantom(grid: &GridSpec, seed: u64) -> Result<Phantom> {
    let dims = grid.dims();
    if dims.iter().any(|&d| d < 32) {
        return Err(SimError::GridTooSmall(format!(
            "phantoms need dims >= 32 per axis, got {dims:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [d, w, h] = dims;
    let spacing = grid.spacing();
    let n = grid.voxel_count();

    // ellipsoid center and semi-axes in index units, leaving room for the
    // CSF rim, skull shell and a background margin
    let center = [
        (d as f64 - 1.0) / 2.0,
        (w as f64 - 1.0) / 2.0,
        (h as f64 - 1.0) / 2.0,
    ];
    let mut semi = [0.0f64; 3];
    for a in 0..3 {
        let room = (dims[a] as f64 - 1.0) / 2.0 - 4.5;
        semi[a] = room * rng.random_range(0.86..0.98);
    }

    // parenchyma from the normalized ellipsoid distance
    let mut parenchyma = vec![false; n];
    for idx in 0..n {
        let [i, j, k] = grid.unravel(idx);
        let rho = ((i as f64 - center[0]) / semi[0]).powi(2)
            + ((j as f64 - center[1]) / semi[1]).powi(2)
            + ((k as f64 - center[2]) / semi[2]).powi(2);
        parenchyma[idx] = rho <= 1.0;
    }

    let csf_width = rng.random_range(1..=2usize);
    let skull_width = rng.random_range(1..=2usize);
    let dilation = dilation_distance(&parenchyma, grid, csf_width + skull_width);

    let mut labels = vec![TissueLabel::Background.code(); n];
    for idx in 0..n {
        if parenchyma[idx] {
            labels[idx] = TissueLabel::Parenchyma.code();
        } else if let Some(steps) = dilation[idx] {
            labels[idx] = if steps <= csf_width {
                TissueLabel::Csf.code()
            } else {
                TissueLabel::Skull.code()
            };
        }
    }

    // tumor: a world-space sphere plus edema collar, fully inside the
    // parenchyma with margin
    let min_semi_mm = (0..3)
        .map(|a| semi[a] * spacing[a])
        .fold(f64::INFINITY, f64::min);
    let tumor_radius = min_semi_mm * rng.random_range(0.28..0.40);
    let edema_radius = 1.9 * tumor_radius;
    // random offset direction in normalized ellipsoid coordinates
    let dir = random_unit(&mut rng);
    let hi = (0.78 - edema_radius / min_semi_mm).max(0.0).min(0.75);
    let lo = 0.15f64.min(hi * 0.9);
    let rho_offset = rng.random_range(lo..=hi.max(lo));
    let tumor_center_idx = [
        center[0] + dir[0] * rho_offset * semi[0],
        center[1] + dir[1] * rho_offset * semi[1],
        center[2] + dir[2] * rho_offset * semi[2],
    ];
    let origin = grid.origin();
    let tumor_center = [
        origin[0] + tumor_center_idx[0] * spacing[0],
        origin[1] + tumor_center_idx[1] * spacing[1],
        origin[2] + tumor_center_idx[2] * spacing[2],
    ];
    for idx in 0..n {
        if labels[idx] != TissueLabel::Parenchyma.code() {
            continue;
        }
        let [i, j, k] = grid.unravel(idx);
        let p = grid.world(i, j, k);
        let dist = ((p[0] - tumor_center[0]).powi(2)
            + (p[1] - tumor_center[1]).powi(2)
            + (p[2] - tumor_center[2]).powi(2))
        .sqrt();
        if dist <= tumor_radius {
            labels[idx] = TissueLabel::TumorCore.code();
        } else if dist <= edema_radius {
            labels[idx] = TissueLabel::Edema.code();
        }
    }

    // intracranial texture: Gaussian bumps standing in for gyral/sulcal
    // intensity structure; these are what the keypoint detector locks onto,
    // so their count scales with brain volume to yield hundreds of
    // candidates on production-size grids
    // intracranial texture: band-limited random fields (smoothed white
    // noise at two correlation scales), the stochastic structure that makes
    // real MR images rich in scale-space extrema for the keypoint detector
    let mut texture = vec![0.0f64; n];
    for (corr_sigma, strength) in [(0.9f64, 0.22f64), (1.5, 0.15), (2.5, 0.10)] {
        let mut noise = vec![0.0f64; n];
        for v in noise.iter_mut() {
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            *v = (-2.0 * u1.ln()).sqrt() * u2.cos();
        }
        let band = smooth(&noise, dims, corr_sigma);
        let std = (band.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        for (t, b) in texture.iter_mut().zip(&band) {
            *t += strength * b / std.max(1e-12);
        }
    }

    // T1-like intensities: tissue plateaus, smooth modulation, mild noise
    let plateaus = [0.02, 0.10, 0.25, 0.60, 0.72, 0.85];
    let mod_freq: [[f64; 3]; 2] = [
        [
            rng.random_range(0.5..1.5),
            rng.random_range(0.5..1.5),
            rng.random_range(0.5..1.5),
        ],
        [
            rng.random_range(1.0..2.5),
            rng.random_range(1.0..2.5),
            rng.random_range(1.0..2.5),
        ],
    ];
    let mod_phase: [f64; 2] = [
        rng.random_range(0.0..std::f64::consts::TAU),
        rng.random_range(0.0..std::f64::consts::TAU),
    ];
    let mut image = vec![0.0f64; n];
    for idx in 0..n {
        let [i, j, k] = grid.unravel(idx);
        let u = [
            i as f64 / d as f64,
            j as f64 / w as f64,
            k as f64 / h as f64,
        ];
        let mut modulation = 1.0;
        for (f, phase) in mod_freq.iter().zip(mod_phase) {
            let arg = std::f64::consts::TAU * (f[0] * u[0] + f[1] * u[1] + f[2] * u[2]) + phase;
            modulation += 0.04 * arg.sin();
        }
        let noise: f64 = {
            // Box-Muller on two uniform draws
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (-2.0 * u1.ln()).sqrt() * u2.cos() * 0.01
        };
        let tex = if labels[idx] >= TissueLabel::Csf.code() {
            texture[idx]
        } else {
            0.0
        };
        let v = plateaus[labels[idx] as usize] * modulation + tex + noise;
        image[idx] = v.max(0.0);
    }

    Ok(Phantom {
        image: Volume::new(grid.clone(), image)?,
        labels: LabelVolume::new(grid.clone(), labels)?,
        tumor_center,
    })
}

/// Separable Gaussian smoothing (3σ truncation, replicated edges) for the
/// texture bands.
fn smooth(data: &[f64], dims: [usize; 3], sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= sum);
    let [d, w, h] = dims;
    let mut cur = data.to_vec();
    for axis in 0..3 {
        let len = dims[axis] as isize;
        let mut next = vec![0.0f64; cur.len()];
        for i in 0..d {
            for j in 0..w {
                for k in 0..h {
                    let pos = [i as isize, j as isize, k as isize];
                    let mut acc = 0.0;
                    for (t, &kv) in kernel.iter().enumerate() {
                        let mut q = pos;
                        q[axis] = (pos[axis] + t as isize - radius).clamp(0, len - 1);
                        acc += kv * cur[(q[0] as usize * w + q[1] as usize) * h + q[2] as usize];
                    }
                    next[(i * w + j) * h + k] = acc;
                }
            }
        }
        cur = next;
    }
    cur
}

/// 6-connected dilation distance from a mask, up to `max_steps`:
/// `Some(steps)` for voxels outside the mask within range, `None` beyond.
fn dilation_distance(mask: &[bool], grid: &GridSpec, max_steps: usize) -> Vec<Option<usize>> {
    let [d, w, h] = grid.dims();
    let mut dist: Vec<Option<usize>> = vec![None; mask.len()];
    let mut frontier: Vec<usize> = Vec::new();
    for (idx, &m) in mask.iter().enumerate() {
        if m {
            frontier.push(idx);
        }
    }
    let mut step = 0usize;
    while !frontier.is_empty() && step < max_steps {
        step += 1;
        let mut next = Vec::new();
        for &idx in &frontier {
            let [i, j, k] = grid.unravel(idx);
            let coords = [i as isize, j as isize, k as isize];
            let dims = [d as isize, w as isize, h as isize];
            for ax in 0..3 {
                for s in [-1isize, 1] {
                    let mut q = coords;
                    q[ax] += s;
                    if q[ax] < 0 || q[ax] >= dims[ax] {
                        continue;
                    }
                    let qi = (q[0] as usize * w + q[1] as usize) * h + q[2] as usize;
                    if !mask[qi] && dist[qi].is_none() {
                        dist[qi] = Some(step);
                        next.push(qi);
                    }
                }
            }
        }
        frontier = next;
    }
    dist
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n2: f64 = v.iter().map(|c| c * c).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Structural invariants: the tumor core is one 6-connected component and
/// no brain voxel reaches background without crossing the skull.
pub fn check_phantom(phantom: &Phantom) -> Result<()> {
    let labels = &phantom.labels;
    let grid = labels.grid();
    let [d, w, h] = grid.dims();
    let idx = |i: usize, j: usize, k: usize| (i * w + j) * h + k;

    // tumor connectivity
    let tumor: Vec<usize> = labels
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == TissueLabel::TumorCore.code())
        .map(|(i, _)| i)
        .collect();
    if tumor.is_empty() {
        return Err(SimError::InvalidPhantom("no tumor voxels".into()));
    }
    let mut seen = vec![false; labels.labels().len()];
    let mut stack = vec![tumor[0]];
    seen[tumor[0]] = true;
    let mut reached = 0usize;
    while let Some(v) = stack.pop() {
        reached += 1;
        let k = v % h;
        let j = (v / h) % w;
        let i = v / (w * h);
        let coords = [i as isize, j as isize, k as isize];
        let dims = [d as isize, w as isize, h as isize];
        for ax in 0..3 {
            for s in [-1isize, 1] {
                let mut q = coords;
                q[ax] += s;
                if q[ax] < 0 || q[ax] >= dims[ax] {
                    continue;
                }
                let qi = idx(q[0] as usize, q[1] as usize, q[2] as usize);
                if !seen[qi] && labels.labels()[qi] == TissueLabel::TumorCore.code() {
                    seen[qi] = true;
                    stack.push(qi);
                }
            }
        }
    }
    if reached != tumor.len() {
        return Err(SimError::InvalidPhantom(format!(
            "tumor core split into components: {reached} of {} reachable",
            tumor.len()
        )));
    }

    // skull closure: flood background from the volume faces; it must never
    // touch a brain voxel
    let mut seen = vec![false; labels.labels().len()];
    let mut stack = Vec::new();
    for i in 0..d {
        for j in 0..w {
            for k in 0..h {
                if i == 0 || j == 0 || k == 0 || i == d - 1 || j == w - 1 || k == h - 1 {
                    let v = idx(i, j, k);
                    if labels.labels()[v] == TissueLabel::Background.code() && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
    }
    while let Some(v) = stack.pop() {
        let k = v % h;
        let j = (v / h) % w;
        let i = v / (w * h);
        let coords = [i as isize, j as isize, k as isize];
        let dims = [d as isize, w as isize, h as isize];
        for ax in 0..3 {
            for s in [-1isize, 1] {
                let mut q = coords;
                q[ax] += s;
                if q[ax] < 0 || q[ax] >= dims[ax] {
                    continue;
                }
                let qi = idx(q[0] as usize, q[1] as usize, q[2] as usize);
                if seen[qi] {
                    continue;
                }
                let code = labels.labels()[qi];
                if code == TissueLabel::Skull.code() {
                    continue; // the shell blocks the flood
                }
                if code == TissueLabel::Background.code() {
                    seen[qi] = true;
                    stack.push(qi);
                } else {
                    return Err(SimError::InvalidPhantom(format!(
                        "background reaches tissue code {code} without crossing skull"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids() {
        let g = GridSpec::isotropic([16, 48, 48]).unwrap();
        assert!(matches!(
            make_phantom(&g, 0),
            Err(SimError::GridTooSmall(_))
        ));
    }

    #[test]
    fn deterministic_in_seed() {
        let g = GridSpec::isotropic([32, 32, 32]).unwrap();
        let a = make_phantom(&g, 7).unwrap();
        let b = make_phantom(&g, 7).unwrap();
        assert_eq!(a.image.data(), b.image.data());
        assert_eq!(a.labels.labels(), b.labels.labels());
        assert_eq!(a.tumor_center, b.tumor_center);
        let c = make_phantom(&g, 8).unwrap();
        assert_ne!(a.labels.labels(), c.labels.labels());
    }

    #[test]
    fn invariants_hold_across_seeds() {
        let g = GridSpec::isotropic([36, 32, 34]).unwrap();
        for seed in 0..8 {
            let p = make_phantom(&g, seed).unwrap();
            check_phantom(&p).unwrap();
        }
    }

    #[test]
    fn tumor_voxel_count_tracks_sphere_volume() {
        let g = GridSpec::isotropic([48, 48, 48]).unwrap();
        for seed in [3u64, 19, 101] {
            let p = make_phantom(&g, seed).unwrap();
            let count = p
                .labels
                .labels()
                .iter()
                .filter(|&&c| c == TissueLabel::TumorCore.code())
                .count();
            // recover the radius as the farthest tumor voxel from the center
            let grid = p.labels.grid();
            let mut r = 0.0f64;
            for idx in 0..grid.voxel_count() {
                if p.labels.labels()[idx] == TissueLabel::TumorCore.code() {
                    let [i, j, k] = grid.unravel(idx);
                    let q = grid.world(i, j, k);
                    let dist = ((q[0] - p.tumor_center[0]).powi(2)
                        + (q[1] - p.tumor_center[1]).powi(2)
                        + (q[2] - p.tumor_center[2]).powi(2))
                    .sqrt();
                    r = r.max(dist);
                }
            }
            let sphere = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
            let shell = 4.0 * std::f64::consts::PI * r * r * 1.5; // one-voxel surface shell
            assert!(
                (count as f64 - sphere).abs() <= shell,
                "seed {seed}: {count} voxels vs sphere {sphere:.1} ± {shell:.1}"
            );
        }
    }
}
