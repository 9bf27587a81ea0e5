use conecoord_core::cones::{project_ball, Cone, ConeKind, ConeSpec, DualBall};
use conecoord_core::diagnostics::feasibility_dist;
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// A cone together with three points of matching dimension.
fn cone_and_points() -> impl Strategy<Value = (Cone, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let cone = prop_oneof![
        (1usize..8).prop_map(|d| Cone::orthant(d).unwrap()),
        (2usize..11).prop_map(|d| Cone::second_order(d).unwrap()),
        (1usize..4).prop_map(|d| Cone::zero(d).unwrap()),
        (1usize..4, 2usize..5).prop_map(|(a, b)| {
            Cone::product(vec![
                ConeSpec::new(ConeKind::NonnegativeOrthant, a).unwrap(),
                ConeSpec::new(ConeKind::SecondOrderCone, b).unwrap(),
            ])
            .unwrap()
        }),
    ];
    cone.prop_flat_map(|c| {
        let m = c.dim();
        let v = || prop::collection::vec(-5.0f64..5.0, m);
        (Just(c), v(), v(), v())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn moreau_decomposition((cone, y, _x, _z) in cone_and_points()) {
        let p = cone.project_dual(&y).unwrap();
        let n = cone.project_neg(&y).unwrap();
        prop_assert!(norm(&sub(&y, &add(&p, &n))) <= 1e-12 * (1.0 + norm(&y)));
        prop_assert!(dot(&p, &n).abs() <= 1e-10 * (1.0 + dot(&y, &y)));
        prop_assert!(cone.dual_contains(&p, 1e-12));
    }

    #[test]
    fn nonexpansive((cone, x, y, _z) in cone_and_points()) {
        let px = cone.project_dual(&x).unwrap();
        let py = cone.project_dual(&y).unwrap();
        prop_assert!(norm(&sub(&px, &py)) <= norm(&sub(&x, &y)) * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn variational_inequality((cone, x, z, _w) in cone_and_points()) {
        let px = cone.project_dual(&x).unwrap();
        let w = cone.project_dual(&z).unwrap();
        prop_assert!(dot(&sub(&w, &px), &sub(&x, &px)) <= 1e-10);
    }

    #[test]
    fn three_point_inequality((cone, x, y, z) in cone_and_points()) {
        let a = cone.project_dual(&add(&z, &x)).unwrap();
        let b = cone.project_dual(&add(&z, &y)).unwrap();
        let lhs = 2.0 * dot(&sub(&a, &b), &x);
        let rhs = dot(&sub(&x, &y), &sub(&x, &y)) + dot(&sub(&a, &z), &sub(&a, &z))
            - dot(&sub(&b, &z), &sub(&b, &z));
        prop_assert!(lhs <= rhs + 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn projection_is_idempotent((cone, y, _x, _z) in cone_and_points()) {
        let p = cone.project_dual(&y).unwrap();
        let pp = cone.project_dual(&p).unwrap();
        prop_assert!(norm(&sub(&p, &pp)) <= 1e-12 * (1.0 + norm(&p)));
    }

    #[test]
    fn feasibility_distance_vanishes_exactly_on_negative_cone((cone, y, _x, _z) in cone_and_points()) {
        let inside = cone.project_neg(&y).unwrap();
        prop_assert!(feasibility_dist(&cone, &inside).unwrap() <= 1e-12 * (1.0 + norm(&y)));
        let d = feasibility_dist(&cone, &y).unwrap();
        // Distance to −C, measured directly.
        prop_assert!((d - norm(&sub(&y, &inside))).abs() <= 1e-12 * (1.0 + norm(&y)));
        if d > 1e-9 {
            prop_assert!(norm(&cone.project_dual(&y).unwrap()) > 0.0);
        }
    }

    #[test]
    fn ball_projection(y in prop::collection::vec(-10.0f64..10.0, 1..6), mu in 0.0f64..8.0) {
        let ball = DualBall::new(mu).unwrap();
        let p = project_ball(&ball, &y);
        prop_assert!(norm(&p) <= mu + 1e-12);
        if norm(&y) <= mu {
            prop_assert_eq!(p, y);
        } else {
            // Radial: parallel to y.
            let scale = mu / norm(&y);
            for (a, b) in p.iter().zip(&y) {
                prop_assert!((a - scale * b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn soc_projection_matches_distance_minimization() {
    // Brute force over the cone boundary parameterized by (t, direction) for dimension 2,
    // where the boundary is the two rays t(1, ±1).
    let cases = [
        [0.3, 1.0],
        [-0.2, 0.9],
        [2.0, -1.0],
        [-3.0, 0.5],
        [0.0, -2.0],
    ];
    let cone = Cone::second_order(2).unwrap();
    for y in cases {
        let p = cone.project_dual(&y).unwrap();
        let mut best = f64::INFINITY;
        let mut arg = [0.0, 0.0];
        for sign in [-1.0, 1.0] {
            for i in 0..=200_000 {
                let t = i as f64 * 5e-5;
                let c = [t, sign * t];
                let d = norm(&sub(&y, &c));
                if d < best {
                    best = d;
                    arg = c;
                }
            }
        }
        if y[0] >= y[1].abs() {
            arg = y;
        }
        assert!(norm(&sub(&p, &arg)) <= 1e-4, "{y:?}: {p:?} vs {arg:?}");
    }
}
