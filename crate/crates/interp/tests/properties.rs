//! Property tests for the interpolators.

use proptest::prelude::*;
use shiftfield_interp::{delaunay_build, tps_fit};

fn point_cloud() -> impl Strategy<Value = Vec<[f64; 3]>> {
    proptest::collection::vec([0.0f64..30.0, 0.0f64..30.0, 0.0f64..30.0], 8..24)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tps_side_conditions_hold_after_every_fit(
        pts in point_cloud(),
        lambda in prop_oneof![Just(0.0), Just(0.01), Just(0.1), Just(1.0)],
    ) {
        let d: Vec<[f64; 3]> = pts
            .iter()
            .map(|p| [(p[0] * 0.4).sin(), (p[1] * 0.6).cos(), (p[2] * 0.5).sin()])
            .collect();
        match tps_fit(&pts, &d, lambda) {
            Ok(model) => prop_assert!(model.side_condition_residual() < 1e-8),
            Err(_) => {} // degenerate random draw; fit is allowed to refuse
        }
    }

    #[test]
    fn barycentric_weights_normalized_in_hull(pts in point_cloud(), q in [1.0f64..29.0, 1.0f64..29.0, 1.0f64..29.0]) {
        if let Ok(tets) = delaunay_build(&pts) {
            if let Some((t, lam)) = tets.locate(q, 0) {
                prop_assert!(t < tets.tets().len());
                let sum: f64 = lam.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(lam.iter().all(|&l| l >= 0.0));
            }
        }
    }

    #[test]
    fn all_tets_positively_oriented(pts in point_cloud()) {
        if let Ok(tets) = delaunay_build(&pts) {
            let p = tets.points();
            for t in tets.tets() {
                let a = p[t[0]];
                let b = p[t[1]];
                let c = p[t[2]];
                let d = p[t[3]];
                let v = (b[0] - a[0])
                    * ((c[1] - a[1]) * (d[2] - a[2]) - (c[2] - a[2]) * (d[1] - a[1]))
                    - (b[1] - a[1])
                        * ((c[0] - a[0]) * (d[2] - a[2]) - (c[2] - a[2]) * (d[0] - a[0]))
                    + (b[2] - a[2])
                        * ((c[0] - a[0]) * (d[1] - a[1]) - (c[1] - a[1]) * (d[0] - a[0]));
                prop_assert!(v > 0.0, "non-positive tet volume {v}");
            }
        }
    }
}
