use rand::{Rng, RngExt};
use shiftfield_core::DisplacementField;

use crate::{KeypointError, KeypointSet, Result};

/// Uniform sample of `m` candidates without replacement.
///
/// When `m` is at least the candidate count, all candidates are returned and
/// the flag is set. Deterministic given the RNG state.
pub fn sample_keypoints<R: Rng + ?Sized>(
    candidates: &[[f64; 3]],
    m: usize,
    rng: &mut R,
) -> Result<(Vec<[f64; 3]>, bool)> {
    if candidates.is_empty() {
        return Err(KeypointError::NoCandidates);
    }
    if m >= candidates.len() {
        return Ok((candidates.to_vec(), true));
    }
    // partial Fisher-Yates: the first m slots become the sample
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    for i in 0..m {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    Ok((order[..m].iter().map(|&i| candidates[i]).collect(), false))
}

/// Pairs points with displacements sampled trilinearly from the true field.
pub fn attach_ground_truth(
    points: &[[f64; 3]],
    field: &DisplacementField,
) -> Result<KeypointSet> {
    let grid = field.grid();
    let mut displacements = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if !grid.world_in_bounds(*p) {
            return Err(KeypointError::OutOfGrid {
                index: i,
                point: *p,
            });
        }
        displacements.push(field.sample_world(*p)?);
    }
    KeypointSet::new(points.to_vec(), displacements, grid.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use shiftfield_core::GridSpec;

    fn candidates(n: usize) -> Vec<[f64; 3]> {
        (0..n).map(|i| [i as f64, 0.0, 0.0]).collect()
    }

    #[test]
    fn samples_distinct_subset() {
        let c = candidates(500);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (s, truncated) = sample_keypoints(&c, 20, &mut rng).unwrap();
        assert_eq!(s.len(), 20);
        assert!(!truncated);
        for (i, a) in s.iter().enumerate() {
            assert!(c.contains(a));
            for b in &s[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn oversampling_returns_all_with_flag() {
        let c = candidates(7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, truncated) = sample_keypoints(&c, 20, &mut rng).unwrap();
        assert_eq!(s, c);
        assert!(truncated);
    }

    #[test]
    fn fixed_seed_reproduces_sample() {
        let c = candidates(100);
        let (a, _) = sample_keypoints(&c, 10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let (b, _) = sample_keypoints(&c, 10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_candidates_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            sample_keypoints(&[], 3, &mut rng),
            Err(KeypointError::NoCandidates)
        ));
    }

    #[test]
    fn sampling_marginal_is_uniform() {
        // chi-squared over 10^4 draws of M=2 from 5 candidates; each
        // candidate should appear with probability 2/5. dof = 4, p > 0.001
        // corresponds to chi2 < 18.47.
        let c = candidates(5);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut counts = [0usize; 5];
        for _ in 0..10_000 {
            let (s, _) = sample_keypoints(&c, 2, &mut rng).unwrap();
            for p in s {
                counts[p[0] as usize] += 1;
            }
        }
        let expected = 2.0 / 5.0 * 10_000.0;
        let chi2: f64 = counts
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 18.47, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn attach_zero_field_gives_zero_displacements() {
        let g = GridSpec::isotropic([6, 6, 6]).unwrap();
        let f = DisplacementField::zeros(g);
        let pts = vec![[1.0, 2.0, 3.0], [2.5, 2.5, 2.5]];
        let ks = attach_ground_truth(&pts, &f).unwrap();
        assert!(ks.displacements().iter().all(|d| *d == [0.0; 3]));
    }

    #[test]
    fn attach_at_voxel_center_reads_stored_vector() {
        let g = GridSpec::isotropic([4, 4, 4]).unwrap();
        let mut v = vec![[0.0; 3]; g.voxel_count()];
        v[g.linear(2, 1, 3)] = [0.7, -0.2, 1.1];
        let f = DisplacementField::new(g.clone(), v).unwrap();
        let ks = attach_ground_truth(&[[2.0, 1.0, 3.0]], &f).unwrap();
        assert_eq!(ks.displacements()[0], [0.7, -0.2, 1.1]);
    }

    #[test]
    fn attach_affine_field_is_exact() {
        let g = GridSpec::isotropic([8, 8, 8]).unwrap();
        let aff = |p: [f64; 3]| [0.1 * p[0] - 0.02 * p[1], 0.05 * p[2], 0.03 * p[1] + 1.0];
        let mut v = vec![[0.0; 3]; g.voxel_count()];
        for idx in 0..g.voxel_count() {
            let [i, j, k] = g.unravel(idx);
            v[idx] = aff(g.world(i, j, k));
        }
        let f = DisplacementField::new(g.clone(), v).unwrap();
        let pts = vec![[1.25, 3.5, 2.75], [5.1, 0.4, 6.6]];
        let ks = attach_ground_truth(&pts, &f).unwrap();
        for (p, d) in pts.iter().zip(ks.displacements()) {
            let want = aff(*p);
            for c in 0..3 {
                assert!((d[c] - want[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn attach_rejects_out_of_grid_points() {
        let g = GridSpec::isotropic([4, 4, 4]).unwrap();
        let f = DisplacementField::zeros(g);
        assert!(matches!(
            attach_ground_truth(&[[5.0, 0.0, 0.0]], &f),
            Err(KeypointError::OutOfGrid { .. })
        ));
    }
}
