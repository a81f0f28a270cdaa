use rayon::prelude::*;

/// Separable Gaussian blur with kernels truncated at 3σ and replicated
/// edges. `dims` is `(D, W, H)` with `H` fastest.
pub fn gaussian_blur(data: &[f64], dims: [usize; 3], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let mut out = blur_axis(data, dims, 0, &kernel);
    out = blur_axis(&out, dims, 1, &kernel);
    blur_axis(&out, dims, 2, &kernel)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k = Vec::with_capacity(2 * radius + 1);
    let denom = 2.0 * sigma * sigma;
    for i in -(radius as isize)..=(radius as isize) {
        k.push((-(i * i) as f64 / denom).exp());
    }
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

fn blur_axis(data: &[f64], dims: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<f64> {
    let [d, w, h] = dims;
    let radius = kernel.len() / 2;
    let len = dims[axis] as isize;
    let mut out = vec![0.0f64; data.len()];
    let plane = w * h;
    out.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
        for j in 0..w {
            for k in 0..h {
                let pos = [i as isize, j as isize, k as isize];
                let mut acc = 0.0;
                for (t, &kv) in kernel.iter().enumerate() {
                    let mut q = pos;
                    // replicate out-of-range samples from the edge
                    q[axis] = (pos[axis] + t as isize - radius as isize).clamp(0, len - 1);
                    acc += kv * data[(q[0] as usize * w + q[1] as usize) * h + q[2] as usize];
                }
                slab[j * h + k] = acc;
            }
        }
    });
    let _ = d;
    out
}

/// One octave of a Gaussian/DoG pyramid at a fixed lattice stride.
pub(crate) struct Octave {
    pub dims: [usize; 3],
    /// Full-resolution lattice stride of this octave (1, 2, 4, ...).
    pub stride: usize,
    /// Difference-of-Gaussians volumes, finest scale first.
    pub dogs: Vec<Vec<f64>>,
    /// The Gaussian level used to seed the next octave.
    pub next_base: Vec<f64>,
}

/// Builds one octave: `intervals + 3` Gaussian levels covering a doubling of
/// σ, differenced into `intervals + 2` DoG volumes.
pub(crate) fn build_octave(
    base: &[f64],
    dims: [usize; 3],
    stride: usize,
    sigma0: f64,
    intervals: usize,
) -> Octave {
    let levels = intervals + 3;
    let k = 2.0f64.powf(1.0 / intervals as f64);
    let mut gaussians: Vec<Vec<f64>> = Vec::with_capacity(levels);
    gaussians.push(gaussian_blur(base, dims, sigma0));
    let mut sigma = sigma0;
    for _ in 1..levels {
        let next_sigma = sigma * k;
        let inc = (next_sigma * next_sigma - sigma * sigma).sqrt();
        let blurred = gaussian_blur(gaussians.last().expect("non-empty"), dims, inc);
        gaussians.push(blurred);
        sigma = next_sigma;
    }
    let dogs = gaussians
        .windows(2)
        .map(|pair| {
            pair[1]
                .iter()
                .zip(&pair[0])
                .map(|(a, b)| a - b)
                .collect::<Vec<f64>>()
        })
        .collect();
    // the level at 2·σ0 seeds the next octave after decimation
    let next_base = gaussians[intervals].clone();
    Octave {
        dims,
        stride,
        dogs,
        next_base,
    }
}

/// Stride-2 decimation keeping voxels at even indices.
pub(crate) fn decimate(data: &[f64], dims: [usize; 3]) -> (Vec<f64>, [usize; 3]) {
    let nd = [(dims[0] + 1) / 2, (dims[1] + 1) / 2, (dims[2] + 1) / 2];
    let mut out = Vec::with_capacity(nd[0] * nd[1] * nd[2]);
    for i in 0..nd[0] {
        for j in 0..nd[1] {
            for k in 0..nd[2] {
                out.push(data[(2 * i * dims[1] + 2 * j) * dims[2] + 2 * k]);
            }
        }
    }
    (out, nd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blur_preserves_constant_images() {
        let dims = [8, 8, 8];
        let data = vec![3.5; 512];
        let out = gaussian_blur(&data, dims, 1.7);
        for v in out {
            assert!((v - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_preserves_mass_of_interior_impulse() {
        let dims = [17, 17, 17];
        let mut data = vec![0.0; 17 * 17 * 17];
        data[(8 * 17 + 8) * 17 + 8] = 1.0;
        let out = gaussian_blur(&data, dims, 1.2);
        let sum: f64 = out.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        // peak stays at the center
        let peak = out
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, (8 * 17 + 8) * 17 + 8);
    }

    #[test]
    fn decimation_halves_dims() {
        let dims = [9, 8, 7];
        let data: Vec<f64> = (0..9 * 8 * 7).map(|i| i as f64).collect();
        let (out, nd) = decimate(&data, dims);
        assert_eq!(nd, [5, 4, 4]);
        assert_eq!(out.len(), 80);
        assert_eq!(out[0], 0.0);
    }
}
