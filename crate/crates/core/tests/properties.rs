//! Randomized property tests for the geometry, path, and bound layers.

use proptest::prelude::*;

use reflect_core::bounds::{local_time_bound, local_time_bound_convex};
use reflect_core::geometry::{DomainSpec, R0_INFINITE};
use reflect_core::paths::{control_of_path, SampledPath};
use reflect_core::skorokhod::solve_halfline;

fn box2d(lo: f64, hi: f64) -> DomainSpec {
    DomainSpec::Box {
        dimension: 2,
        lower: vec![Some(lo), Some(lo)],
        upper: vec![Some(hi), Some(hi)],
    }
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_lands_inside(
        x in prop::array::uniform2(-10.0f64..10.0),
    ) {
        let dom = box2d(-1.0, 1.0);
        let p = dom.project(&x).unwrap();
        prop_assert!(dom.contains(&p).unwrap());
        let p2 = dom.project(&p).unwrap();
        prop_assert_eq!(p, p2);
    }

    #[test]
    fn halfspace_projection_never_moves_interior_points(
        x in prop::array::uniform2(0.0f64..10.0),
    ) {
        let dom = DomainSpec::HalfSpace {
            dimension: 2,
            normal: vec![0.0, 1.0],
            offset: 0.0,
        };
        let p = dom.project(&x).unwrap();
        prop_assert_eq!(p, x.to_vec());
    }

    #[test]
    fn halfline_solution_satisfies_constraints(
        nodes in prop::collection::vec(-3.0f64..3.0, 2..40),
    ) {
        let mut shifted = nodes.clone();
        shifted[0] = shifted[0].abs(); // start inside
        let w = SampledPath::from_nodes_1d(1.0, &shifted).unwrap();
        let sol = solve_halfline(&w).unwrap();
        for k in 0..shifted.len() {
            // constraint, exact identity, and monotone local time
            prop_assert!(sol.xi.values[k] >= 0.0);
            let resid = (sol.xi.values[k] - (w.values[k] + sol.phi.values[k])).abs();
            prop_assert!(resid <= 1e-12);
            if k > 0 {
                prop_assert!(sol.phi.values[k] >= sol.phi.values[k - 1]);
            }
        }
    }

    #[test]
    fn common_direction_bound_is_monotone(
        beta in 1.0f64..4.0,
        delta in 0.1f64..2.0,
        omega in 0.0f64..5.0,
        sup_w in 0.0f64..3.0,
        osc in 0.001f64..3.0,
        q in 1.0f64..3.0,
    ) {
        let base = local_time_bound(beta, delta, 2.0, q, omega, sup_w, osc).value;
        prop_assert!(local_time_bound(beta + 0.5, delta, 2.0, q, omega, sup_w, osc).value >= base);
        // shrinking delta only tightens the flat-boundary bound; with
        // curvature the geometry factor itself grows with delta
        let flat = local_time_bound(beta, delta, R0_INFINITE, q, omega, sup_w, osc).value;
        prop_assert!(
            local_time_bound(beta, delta / 2.0, R0_INFINITE, q, omega, sup_w, osc).value >= flat
        );
        prop_assert!(local_time_bound(beta, delta, 1.0, q, omega, sup_w, osc).value >= base);
        prop_assert!(local_time_bound(beta, delta, R0_INFINITE, q, omega, sup_w, osc).value <= base);
        prop_assert!(local_time_bound(beta, delta, 2.0, q, omega + 1.0, sup_w, osc).value >= base);
        prop_assert!(local_time_bound(beta, delta, 2.0, q, omega, sup_w + 1.0, osc).value >= base);
        prop_assert!(local_time_bound(beta, delta, 2.0, q, omega, sup_w, osc + 1.0).value >= base);
    }

    #[test]
    fn convex_bound_is_monotone(
        r0 in 0.2f64..3.0,
        omega in 0.0f64..5.0,
        sup_xi in 0.0f64..4.0,
        osc in 0.001f64..3.0,
        q in 1.0f64..3.0,
    ) {
        let base = local_time_bound_convex(r0, q, omega, sup_xi, osc).value;
        prop_assert!(local_time_bound_convex(r0 / 2.0, q, omega, sup_xi, osc).value >= base);
        prop_assert!(local_time_bound_convex(r0, q, omega + 1.0, sup_xi, osc).value >= base);
        prop_assert!(local_time_bound_convex(r0, q, omega, sup_xi + 1.0, osc).value >= base);
        prop_assert!(local_time_bound_convex(r0, q, omega, sup_xi, osc + 1.0).value >= base);
    }

    #[test]
    fn control_function_dominates_increments(
        nodes in prop::collection::vec(-2.0f64..2.0, 2..30),
        q in 1.0f64..3.0,
        window in prop::array::uniform2(0.0f64..1.0),
    ) {
        let w = SampledPath::from_nodes_1d(1.0, &nodes).unwrap();
        let ctrl = control_of_path(&w, q).unwrap();
        let (s, t) = if window[0] <= window[1] {
            (window[0], window[1])
        } else {
            (window[1], window[0])
        };
        let ws = w.value_at(s).unwrap()[0];
        let wt = w.value_at(t).unwrap()[0];
        let omega = ctrl.eval(s, t).unwrap();
        prop_assert!((wt - ws).abs() <= omega.powf(1.0 / q) + 1e-9);
    }
}
