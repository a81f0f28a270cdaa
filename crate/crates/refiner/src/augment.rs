use rand::{Rng, RngExt};
use shiftfield_core::Volume;
use shiftfield_keypoints::gaussian_blur;

/// Image-only training augmentation with the default 50% application
/// probability per transform.
pub fn augment<R: Rng + ?Sized>(img: &Volume, rng: &mut R) -> Volume {
    augment_with_prob(img, rng, 0.5)
}

/// Applies, each independently with probability `p`: additive Gaussian noise
/// (σ uniform in [0, 0.1] of the intensity std), Gaussian blur (σ uniform in
/// [0.5, 1.5] voxels), brightness/contrast (gain in [0.75, 1.25], bias in
/// [−0.1, 0.1] of the std) and gamma (γ in [0.7, 1.5] on min-max-normalized
/// intensities). Labels and fields are never augmented.
pub fn augment_with_prob<R: Rng + ?Sized>(img: &Volume, rng: &mut R, p: f64) -> Volume {
    let grid = img.grid().clone();
    let mut data = img.data().to_vec();
    let std = intensity_std(&data);

    // additive Gaussian noise
    if rng.random_range(0.0..1.0) < p {
        let sigma = rng.random_range(0.0..0.1) * std;
        for v in data.iter_mut() {
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            *v += (-2.0 * u1.ln()).sqrt() * u2.cos() * sigma;
        }
    }
    // Gaussian blur
    if rng.random_range(0.0..1.0) < p {
        let sigma = rng.random_range(0.5..1.5);
        data = gaussian_blur(&data, grid.dims(), sigma);
    }
    // brightness / contrast
    if rng.random_range(0.0..1.0) < p {
        let gain = rng.random_range(0.75..1.25);
        let bias = rng.random_range(-0.1..0.1) * std;
        for v in data.iter_mut() {
            *v = gain * *v + bias;
        }
    }
    // gamma on min-max-normalized intensities
    if rng.random_range(0.0..1.0) < p {
        let gamma = rng.random_range(0.7..1.5);
        let (lo, hi) = min_max(&data);
        if hi > lo {
            let range = hi - lo;
            for v in data.iter_mut() {
                let t = (*v - lo) / range;
                *v = t.powf(gamma) * range + lo;
            }
        }
    }
    Volume::new(grid, data).expect("augmentation preserves finiteness")
}

fn intensity_std(data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    (data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn min_max(data: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in data {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use shiftfield_core::GridSpec;

    fn test_image() -> Volume {
        let g = GridSpec::isotropic([12, 12, 12]).unwrap();
        let data: Vec<f64> = (0..g.voxel_count())
            .map(|i| (i as f64 * 0.11).sin() * 0.4 + 0.5)
            .collect();
        Volume::new(g, data).unwrap()
    }

    #[test]
    fn zero_probability_is_identity() {
        let img = test_image();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = augment_with_prob(&img, &mut rng, 0.0);
        assert_eq!(out.data(), img.data());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let img = test_image();
        let a = augment(&img, &mut ChaCha8Rng::seed_from_u64(11));
        let b = augment(&img, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn gamma_one_is_identity_to_rounding() {
        let img = test_image();
        let data = img.data().to_vec();
        let (lo, hi) = min_max(&data);
        let range = hi - lo;
        let round_tripped: Vec<f64> = data
            .iter()
            .map(|v| ((v - lo) / range).powf(1.0) * range + lo)
            .collect();
        for (a, b) in data.iter().zip(&round_tripped) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn augmentation_changes_the_image_when_applied() {
        let img = test_image();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = augment_with_prob(&img, &mut rng, 1.0);
        assert_ne!(out.data(), img.data());
    }
}
