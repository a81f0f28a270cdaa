//! Independent-oracle checks for the interpolators.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shiftfield_core::GridSpec;
use shiftfield_interp::{delaunay_build, linear_interpolate, tps_fit};

fn random_points(n: usize, seed: u64, span: f64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            [
                rng.random_range(0.0..span),
                rng.random_range(0.0..span),
                rng.random_range(0.0..span),
            ]
        })
        .collect()
}

fn random_displacements(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect()
}

/// Re-solves the full regularized TPS system with a generic linear-algebra
/// routine and compares control-point residuals against the fitted model.
#[test]
fn tps_residuals_match_independent_dense_solve() {
    let m = 20usize;
    let pts = random_points(m, 42, 40.0);
    let d = random_displacements(m, 43);
    let lambda = 0.1;
    let model = tps_fit(&pts, &d, lambda).unwrap();

    let n = m + 4;
    for c in 0..3 {
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for i in 0..m {
            for j in 0..m {
                let r = if i == j {
                    lambda * m as f64
                } else {
                    let dx = pts[i][0] - pts[j][0];
                    let dy = pts[i][1] - pts[j][1];
                    let dz = pts[i][2] - pts[j][2];
                    (dx * dx + dy * dy + dz * dz).sqrt()
                };
                a[(i, j)] = r;
            }
            a[(i, m)] = 1.0;
            a[(m, i)] = 1.0;
            for ax in 0..3 {
                a[(i, m + 1 + ax)] = pts[i][ax];
                a[(m + 1 + ax, i)] = pts[i][ax];
            }
            b[i] = d[i][c];
        }
        let sol = a.lu().solve(&b).expect("oracle solve");
        // evaluate the oracle spline at each control point
        for (i, p) in pts.iter().enumerate() {
            let mut val = sol[m] + sol[m + 1] * p[0] + sol[m + 2] * p[1] + sol[m + 3] * p[2];
            for (j, x) in pts.iter().enumerate() {
                let dx = p[0] - x[0];
                let dy = p[1] - x[1];
                let dz = p[2] - x[2];
                val += sol[j] * (dx * dx + dy * dy + dz * dz).sqrt();
            }
            let got = model.evaluate_at(*p)[c];
            let oracle_residual = val - d[i][c];
            let got_residual = got - d[i][c];
            assert!(
                (oracle_residual - got_residual).abs() < 1e-8,
                "component {c} point {i}: oracle {oracle_residual} vs {got_residual}"
            );
            assert!(
                oracle_residual.abs() > 1e-9,
                "regularized fit should not interpolate exactly"
            );
        }
    }
}

/// Fitting with zero regularization and densely evaluating: trilinear
/// samples of the dense field at the control points match the displacements
/// up to one-voxel interpolation error.
#[test]
fn dense_tps_field_agrees_with_closed_form_at_controls() {
    let m = 12usize;
    let span = 20.0;
    let pts = random_points(m, 7, span);
    let d = random_displacements(m, 8);
    let model = tps_fit(&pts, &d, 0.0).unwrap();
    let grid = GridSpec::new([22, 22, 22], [1.0; 3], [0.0; 3]).unwrap();
    let field = model.evaluate(&grid);
    for (p, want) in pts.iter().zip(&d) {
        let sampled = field.sample_world(*p).unwrap();
        let exact = model.evaluate_at(*p);
        // the dense grid only carries the field to trilinear accuracy
        for c in 0..3 {
            assert!((exact[c] - want[c]).abs() < 1e-6, "closed form interpolates");
            assert!(
                (sampled[c] - want[c]).abs() < 0.2,
                "grid sample within one-voxel interpolation error: {} vs {}",
                sampled[c],
                want[c]
            );
        }
    }
}

/// Two insertion orders give the same hull volume and the same in-hull
/// interpolant on points in general position.
#[test]
fn delaunay_insertion_order_invariance() {
    let pts = random_points(30, 11, 30.0);
    let d = random_displacements(30, 12);
    let t1 = delaunay_build(&pts).unwrap();
    let mut rev: Vec<[f64; 3]> = pts.clone();
    rev.reverse();
    let mut drev: Vec<[f64; 3]> = d.clone();
    drev.reverse();
    let t2 = delaunay_build(&rev).unwrap();

    assert!(
        (t1.total_volume() - t2.total_volume()).abs() < 1e-9 * t1.total_volume(),
        "volumes {} vs {}",
        t1.total_volume(),
        t2.total_volume()
    );

    let grid = GridSpec::new([16, 16, 16], [2.0; 3], [0.0; 3]).unwrap();
    let f1 = linear_interpolate(&t1, &d, &grid).unwrap();
    let f2 = linear_interpolate(&t2, &drev, &grid).unwrap();
    for (a, b) in f1.vectors().iter().zip(f2.vectors()) {
        for c in 0..3 {
            assert!(
                (a[c] - b[c]).abs() < 1e-9,
                "interpolants differ: {a:?} vs {b:?}"
            );
        }
    }
}

/// Piecewise-linear interpolation is continuous across interior faces: for
/// affine data, samples along a segment crossing the hull interior follow
/// the affine map with no jumps.
#[test]
fn linear_interpolation_continuous_across_faces() {
    let pts = random_points(15, 21, 25.0);
    let tets = delaunay_build(&pts).unwrap();
    let aff = |p: [f64; 3]| -> [f64; 3] {
        [
            0.04 * p[0] + 0.01 * p[1] - 0.3,
            -0.02 * p[1] + 0.05 * p[2],
            0.03 * p[0] - 0.01 * p[2] + 0.8,
        ]
    };
    let d: Vec<[f64; 3]> = tets.points().iter().map(|p| aff(*p)).collect();
    // sample along a segment through the interior
    let a = [2.0, 2.0, 2.0];
    let b = [23.0, 21.0, 22.0];
    let mut prev: Option<[f64; 3]> = None;
    let mut in_hull = 0usize;
    for step in 0..=400 {
        let t = step as f64 / 400.0;
        let p = [
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ];
        if let Some((tet, lam)) = tets.locate(p, 0) {
            let verts = tets.tets()[tet];
            let mut v = [0.0f64; 3];
            for (slot, &vi) in verts.iter().enumerate() {
                for c in 0..3 {
                    v[c] += lam[slot] * d[vi][c];
                }
            }
            let want = aff(p);
            for c in 0..3 {
                assert!((v[c] - want[c]).abs() < 1e-9, "affine reproduction at {p:?}");
            }
            if let Some(pv) = prev {
                // segment step is small; affine bound gives a tiny change
                for c in 0..3 {
                    assert!((v[c] - pv[c]).abs() < 0.05, "jump at {p:?}");
                }
            }
            prev = Some(v);
            in_hull += 1;
        } else {
            prev = None;
        }
    }
    assert!(in_hull > 100, "segment should cross the hull");
}
