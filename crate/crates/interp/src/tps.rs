use rayon::prelude::*;
use shiftfield_core::{DisplacementField, GridSpec};

use crate::solve::solve_lu;
use crate::{InterpError, Result};

/// Fitted 3D thin-plate spline with kernel `U(r) = r`.
///
/// Per output component `c`, the interpolant is
/// `φ_c(p) = Σ_i w_ic · ‖p − x_i‖ + a_0c + a_1c p_0 + a_2c p_1 + a_3c p_2`.
/// The weights satisfy the side conditions `Σ_i w_i = 0` and
/// `Σ_i w_i ⊗ x_i = 0` per component, which make the kernel part decay and
/// leave pure affine behaviour at large distances.
#[derive(Debug, Clone)]
pub struct TpsModel {
    control_points: Vec<[f64; 3]>,
    weights: Vec<[f64; 3]>,
    affine: [[f64; 3]; 4],
    lambda_tps: f64,
}

/// Fits the spline to matched displacements by solving, per output
/// component, the `(M+4)×(M+4)` system
/// `[[K + λ·M·I, P], [Pᵀ, 0]] · [w; a] = [d_c; 0]`
/// with `K_ij = ‖x_i − x_j‖` and `P` rows `(1, x_i)`. The `λ·M` scaling keeps
/// `lambda` comparable across keypoint counts.
pub fn tps_fit(points: &[[f64; 3]], displacements: &[[f64; 3]], lambda: f64) -> Result<TpsModel> {
    let m = points.len();
    if m < 4 {
        return Err(InterpError::TooFewPoints { need: 4, got: m });
    }
    if displacements.len() != m {
        return Err(InterpError::DisplacementCount {
            got: displacements.len(),
            want: m,
        });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(InterpError::Degenerate(format!(
            "lambda_tps must be finite and non-negative, got {lambda}"
        )));
    }
    check_not_degenerate(points)?;

    let n = m + 4;
    let mut a = vec![0.0f64; n * n];
    for i in 0..m {
        for j in (i + 1)..m {
            let r = dist(points[i], points[j]);
            a[i * n + j] = r;
            a[j * n + i] = r;
        }
        a[i * n + i] = lambda * m as f64;
        // P block and its transpose
        a[i * n + m] = 1.0;
        a[(m) * n + i] = 1.0;
        for c in 0..3 {
            a[i * n + m + 1 + c] = points[i][c];
            a[(m + 1 + c) * n + i] = points[i][c];
        }
    }
    let mut rhs = vec![0.0f64; n * 3];
    for i in 0..m {
        for c in 0..3 {
            rhs[i * 3 + c] = displacements[i][c];
        }
    }
    let sol = solve_lu(a, n, rhs, 3).map_err(|e| match e {
        InterpError::Singular(msg) => InterpError::Degenerate(format!(
            "control points are coplanar or coincident ({msg})"
        )),
        other => other,
    })?;

    let weights: Vec<[f64; 3]> = (0..m)
        .map(|i| [sol[i * 3], sol[i * 3 + 1], sol[i * 3 + 2]])
        .collect();
    let mut affine = [[0.0f64; 3]; 4];
    for r in 0..4 {
        for c in 0..3 {
            affine[r][c] = sol[(m + r) * 3 + c];
        }
    }
    Ok(TpsModel {
        control_points: points.to_vec(),
        weights,
        affine,
        lambda_tps: lambda,
    })
}

impl TpsModel {
    pub fn control_points(&self) -> &[[f64; 3]] {
        &self.control_points
    }

    pub fn weights(&self) -> &[[f64; 3]] {
        &self.weights
    }

    /// Affine term as rows `(1, x, y, z)` against columns per component.
    pub fn affine(&self) -> &[[f64; 3]; 4] {
        &self.affine
    }

    pub fn lambda_tps(&self) -> f64 {
        self.lambda_tps
    }

    /// Largest violation of the side conditions, normalized by the weight
    /// scale; fits on non-degenerate data keep this below ~1e-8.
    pub fn side_condition_residual(&self) -> f64 {
        let mut sums = [[0.0f64; 3]; 4];
        for (w, x) in self.weights.iter().zip(&self.control_points) {
            for c in 0..3 {
                sums[0][c] += w[c];
                for ax in 0..3 {
                    sums[1 + ax][c] += w[c] * x[ax];
                }
            }
        }
        let wscale: f64 = self
            .weights
            .iter()
            .flat_map(|w| w.iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let xscale: f64 = self
            .control_points
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
            .max(1.0);
        if wscale < 1e-14 {
            // a vanishing kernel part satisfies the side conditions trivially
            return 0.0;
        }
        let mut worst = 0.0f64;
        for (r, row) in sums.iter().enumerate() {
            let denom = if r == 0 { wscale } else { wscale * xscale };
            for &v in row {
                worst = worst.max(v.abs() / denom);
            }
        }
        worst
    }

    /// Evaluates the interpolant at one world point.
    pub fn evaluate_at(&self, p: [f64; 3]) -> [f64; 3] {
        let mut out = [
            self.affine[0][0] + self.affine[1][0] * p[0] + self.affine[2][0] * p[1] + self.affine[3][0] * p[2],
            self.affine[0][1] + self.affine[1][1] * p[0] + self.affine[2][1] * p[1] + self.affine[3][1] * p[2],
            self.affine[0][2] + self.affine[1][2] * p[0] + self.affine[2][2] * p[1] + self.affine[3][2] * p[2],
        ];
        for (w, x) in self.weights.iter().zip(&self.control_points) {
            let r = dist(p, *x);
            out[0] += w[0] * r;
            out[1] += w[1] * r;
            out[2] += w[2] * r;
        }
        out
    }

    /// Dense evaluation at every voxel center. Callers apply label masking
    /// afterwards.
    pub fn evaluate(&self, grid: &GridSpec) -> DisplacementField {
        let [_, w, h] = grid.dims();
        let plane = w * h;
        let mut vectors = vec![[0.0f64; 3]; grid.voxel_count()];
        vectors
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(i, slab)| {
                for j in 0..w {
                    for k in 0..h {
                        slab[j * h + k] = self.evaluate_at(grid.world(i, j, k));
                    }
                }
            });
        DisplacementField::new(grid.clone(), vectors).expect("finite by construction")
    }
}

/// Exact-duplicate and coplanarity screening; returns a descriptive error
/// naming the degenerate configuration.
fn check_not_degenerate(points: &[[f64; 3]]) -> Result<()> {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i] == points[j] {
                return Err(InterpError::Degenerate(format!(
                    "points {i} and {j} coincide at {:?}",
                    points[i]
                )));
            }
        }
    }
    // greedy search for four points spanning a non-degenerate volume
    let p0 = points[0];
    let scale = points
        .iter()
        .map(|p| dist(*p, p0))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut best_vol = 0.0f64;
    let (mut b1, mut b2) = (0usize, 0usize);
    for i in 1..points.len() {
        for j in (i + 1)..points.len() {
            let c = cross(sub(points[i], p0), sub(points[j], p0));
            let area = norm(c);
            if area > best_vol {
                best_vol = area;
                b1 = i;
                b2 = j;
            }
        }
    }
    if best_vol <= scale * scale * 1e-12 {
        return Err(InterpError::Degenerate(
            "all control points are collinear".into(),
        ));
    }
    let nrm = cross(sub(points[b1], p0), sub(points[b2], p0));
    let vol = points
        .iter()
        .map(|p| dot(nrm, sub(*p, p0)).abs())
        .fold(0.0f64, f64::max);
    if vol <= norm(nrm) * scale * 1e-12 {
        return Err(InterpError::Degenerate(
            "all control points are coplanar".into(),
        ));
    }
    Ok(())
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scatter(n: usize, seed: u64) -> Vec<[f64; 3]> {
        // cheap deterministic scatter without pulling rng into unit tests
        let mut pts = Vec::with_capacity(n);
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..n {
            pts.push([next() * 40.0, next() * 40.0, next() * 40.0]);
        }
        pts
    }

    #[test]
    fn constant_displacements_go_to_affine_term() {
        let pts = scatter(12, 7);
        let d = vec![[2.5, -1.0, 0.75]; 12];
        let model = tps_fit(&pts, &d, 0.1).unwrap();
        for w in model.weights() {
            for &c in w {
                assert!(c.abs() < 1e-9, "kernel weight {c}");
            }
        }
        let v = model.evaluate_at([13.0, 5.0, 29.0]);
        for (got, want) in v.iter().zip([2.5, -1.0, 0.75]) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_lambda_interpolates_exactly() {
        let pts = scatter(15, 3);
        let d: Vec<[f64; 3]> = pts
            .iter()
            .map(|p| [p[0].sin(), (p[1] * 0.2).cos(), p[2] * 0.01])
            .collect();
        let model = tps_fit(&pts, &d, 0.0).unwrap();
        for (p, want) in pts.iter().zip(&d) {
            let got = model.evaluate_at(*p);
            for c in 0..3 {
                assert!((got[c] - want[c]).abs() < 1e-6, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn affine_data_reproduced_globally() {
        let pts = scatter(10, 11);
        let aff = |p: [f64; 3]| -> [f64; 3] {
            [
                0.02 * p[0] - 0.01 * p[1] + 1.0,
                0.03 * p[2] - 0.5,
                0.01 * p[0] + 0.02 * p[2],
            ]
        };
        let d: Vec<[f64; 3]> = pts.iter().map(|p| aff(*p)).collect();
        let model = tps_fit(&pts, &d, 0.0).unwrap();
        for w in model.weights() {
            for &c in w {
                assert!(c.abs() < 1e-8);
            }
        }
        for q in [[0.0, 0.0, 0.0], [55.0, -10.0, 20.0], [7.0, 33.0, 12.0]] {
            let got = model.evaluate_at(q);
            let want = aff(q);
            for c in 0..3 {
                assert!((got[c] - want[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn side_conditions_hold() {
        let pts = scatter(20, 5);
        let d: Vec<[f64; 3]> = pts
            .iter()
            .map(|p| [(p[0] * 0.5).sin(), (p[1] * 0.8).cos(), (p[2] * 0.3).sin()])
            .collect();
        for lambda in [0.0, 0.01, 0.1, 1.0] {
            let model = tps_fit(&pts, &d, lambda).unwrap();
            assert!(
                model.side_condition_residual() < 1e-8,
                "residual {} at lambda {}",
                model.side_condition_residual(),
                lambda
            );
        }
    }

    #[test]
    fn smoothing_residual_is_monotone_in_lambda() {
        let pts = scatter(20, 17);
        let d: Vec<[f64; 3]> = pts
            .iter()
            .map(|p| [(p[0] * 0.7).sin(), (p[1] * 0.9).cos(), (p[2] * 0.45).sin()])
            .collect();
        let mut prev = -1.0f64;
        for lambda in [0.0, 0.01, 0.1, 1.0] {
            let model = tps_fit(&pts, &d, lambda).unwrap();
            let ssr: f64 = pts
                .iter()
                .zip(&d)
                .map(|(p, want)| {
                    let got = model.evaluate_at(*p);
                    (0..3).map(|c| (got[c] - want[c]).powi(2)).sum::<f64>()
                })
                .sum();
            assert!(ssr + 1e-12 >= prev, "ssr {ssr} decreased from {prev}");
            prev = ssr;
        }
    }

    #[test]
    fn degenerate_configurations_error() {
        assert!(matches!(
            tps_fit(&[[0.0; 3]; 3], &[[0.0; 3]; 3], 0.0),
            Err(InterpError::TooFewPoints { .. })
        ));
        // coplanar
        let flat = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.3, 0.7, 0.0],
        ];
        let d = vec![[0.0; 3]; 5];
        assert!(matches!(
            tps_fit(&flat, &d, 0.0),
            Err(InterpError::Degenerate(_))
        ));
        // duplicates
        let mut pts = scatter(6, 2);
        pts[3] = pts[1];
        let d = vec![[0.0; 3]; 6];
        assert!(matches!(
            tps_fit(&pts, &d, 0.0),
            Err(InterpError::Degenerate(_))
        ));
    }
}
