//! Closed-form a priori bounds on the boundary local time of a Skorohod
//! solution over a time window, expressed through the driver's oscillation
//! and a q-variation control of the driver.

use serde::{Deserialize, Serialize};

/// A bound evaluation. `overflow` marks results whose exponential factor
/// left the double range; `value` is then `+inf` and the bound is vacuous
/// but still valid.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub overflow: bool,
}

impl BoundValue {
    fn finite(value: f64) -> Self {
        Self {
            value,
            overflow: false,
        }
    }

    fn of(value: f64) -> Self {
        Self {
            value,
            overflow: !value.is_finite(),
        }
    }
}

/// Geometry factor `G(a) = 4 {1 + beta e^{beta (2 delta + a) / (2 r0)}}
/// e^{beta (2 delta + a) / (2 r0)}`. For domains with no exterior-sphere
/// curvature (`r0 = +inf`) the exponent vanishes and `G = 4 (1 + beta)`.
pub fn g_factor(a: f64, beta: f64, delta: f64, r0: f64) -> f64 {
    assert!(a >= 0.0 && beta >= 1.0 && delta > 0.0 && r0 > 0.0);
    if r0.is_infinite() {
        return 4.0 * (1.0 + beta);
    }
    let e = (beta * (2.0 * delta + a) / (2.0 * r0)).exp();
    4.0 * (1.0 + beta * e) * e
}

/// Limit of the geometry factor for a convex domain truncated at radius
/// `outer_radius` around a center whose inscribed ball has radius
/// `inner_radius`: `4 (1 + sqrt(1 + (2 R / R0)^2))`.
pub fn g_factor_convex_limit(outer_radius: f64, inner_radius: f64) -> f64 {
    assert!(outer_radius > 0.0 && inner_radius > 0.0);
    let ratio = 2.0 * outer_radius / inner_radius;
    4.0 * (1.0 + (1.0 + ratio * ratio).sqrt())
}

/// Local-time bound under an exterior-sphere radius `r0` and a common
/// reflection direction with constants `(beta, delta)`:
///
/// `beta ({delta^-1 G(sup_w) + 1}^q omega + 1) (G(sup_w) + 2) osc_window`
///
/// where `sup_w` is the driver's global oscillation, `omega` the window
/// value of a q-variation control of the driver, and `osc_window` the
/// driver's oscillation on the window. A window with no driver movement
/// yields an exact zero.
pub fn local_time_bound(
    beta: f64,
    delta: f64,
    r0: f64,
    q: f64,
    omega: f64,
    sup_w: f64,
    osc_window: f64,
) -> BoundValue {
    assert!(q >= 1.0 && omega >= 0.0 && sup_w >= 0.0 && osc_window >= 0.0);
    if osc_window == 0.0 {
        return BoundValue::finite(0.0);
    }
    let g = g_factor(sup_w, beta, delta, r0);
    let inner = (g / delta + 1.0).powf(q) * omega + 1.0;
    BoundValue::of(beta * inner * (g + 2.0) * osc_window)
}

/// Local-time bound for a convex domain containing the ball of radius
/// `inner_radius` around a reference point, with `sup_xi` the solution's
/// largest distance from that point:
///
/// `10 [{16 R0^-1 s + 1}^q omega + 1] s^2 osc_window`,
/// `s = (1 + 4 R0^-2 sup_xi^2)^{1/2}`.
pub fn local_time_bound_convex(
    inner_radius: f64,
    q: f64,
    omega: f64,
    sup_xi: f64,
    osc_window: f64,
) -> BoundValue {
    assert!(inner_radius > 0.0 && q >= 1.0 && omega >= 0.0 && sup_xi >= 0.0 && osc_window >= 0.0);
    if osc_window == 0.0 {
        return BoundValue::finite(0.0);
    }
    let s2 = 1.0 + 4.0 * (sup_xi / inner_radius) * (sup_xi / inner_radius);
    let s = s2.sqrt();
    let inner = (16.0 / inner_radius * s + 1.0).powf(q) * omega + 1.0;
    BoundValue::of(10.0 * inner * s2 * osc_window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::R0_INFINITE;

    #[test]
    fn geometry_factor_flat_and_curved() {
        assert_eq!(g_factor(0.0, 1.0, 1.0, R0_INFINITE), 8.0);
        assert_eq!(g_factor(100.0, 2.0, 0.1, R0_INFINITE), 12.0);
        // exponent = 1 at a = 0, delta = 1, r0 = 1, beta = 1
        let e = std::f64::consts::E;
        let g = g_factor(0.0, 1.0, 1.0, 1.0);
        assert!((g - 4.0 * (1.0 + e) * e).abs() < 1e-12);
    }

    #[test]
    fn convex_limit_factor() {
        let g = g_factor_convex_limit(1.0, 1.0);
        assert!((g - 4.0 * (1.0 + 5.0_f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn bound_example_values() {
        // beta=1, delta=1, r0=1, q=1, omega=1, sup=osc=1:
        // G(1) = 4 (1 + e^{3/2}) e^{3/2}
        let e32 = 1.5_f64.exp();
        let g = 4.0 * (1.0 + e32) * e32;
        let expect = ((g + 1.0) + 1.0) * (g + 2.0);
        let b = local_time_bound(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(!b.overflow);
        assert!((b.value - expect).abs() < 1e-9 * expect);

        // flat case: G=8, value = (9 omega + 1) * 10 * osc
        let b = local_time_bound(1.0, 1.0, R0_INFINITE, 1.0, 1.0, 5.0, 1.0);
        assert!((b.value - 100.0).abs() < 1e-12);

        // with the G argument at zero the curved unit-parameter case gives
        // (G(0) + 2)^2 with G(0) = 4 (1 + e) e, about 1800.3
        let b = local_time_bound(1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0);
        assert!((b.value - 1800.25).abs() < 0.1, "value {}", b.value);
    }

    #[test]
    fn flat_common_direction_and_convex_bounds_are_comparable() {
        // truncated convex domain, radius 6 around a center with inscribed
        // radius 2: delta = 1, beta = sqrt(37), r0 flat
        let beta = 37.0_f64.sqrt();
        let ab = local_time_bound(beta, 1.0, R0_INFINITE, 1.0, 1.0, 1.0, 1.0);
        let cx = local_time_bound_convex(2.0, 1.0, 1.0, 6.0, 1.0);
        let ratio = ab.value / cx.value;
        assert!(ratio < 1e3 && ratio > 1e-3, "ratio {ratio}");
    }

    #[test]
    fn convex_bound_example() {
        // R0=2, sup_xi=1: s^2 = 2, value = 10 (8 sqrt2 + 1 + 1) * 2
        let b = local_time_bound_convex(2.0, 1.0, 1.0, 1.0, 1.0);
        let expect = 10.0 * (8.0 * 2.0_f64.sqrt() + 2.0) * 2.0;
        assert!((b.value - expect).abs() < 1e-12);
        assert!((expect - 266.27).abs() < 0.01);
    }

    #[test]
    fn zero_window_is_exactly_zero() {
        let b = local_time_bound(2.0, 0.5, 1.0, 2.0, 3.0, 10.0, 0.0);
        assert_eq!(b.value, 0.0);
        assert!(!b.overflow);
        let b = local_time_bound_convex(1.0, 2.0, 3.0, 10.0, 0.0);
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn overflow_flagged_not_panicking() {
        let b = local_time_bound(2.0, 1e-3, 1e-3, 1.0, 1.0, 1e6, 1.0);
        assert!(b.overflow);
        assert!(b.value.is_infinite());
    }

    #[test]
    fn monotone_in_each_argument() {
        let base = local_time_bound(1.5, 0.5, 2.0, 2.0, 1.0, 1.0, 1.0).value;
        assert!(local_time_bound(2.0, 0.5, 2.0, 2.0, 1.0, 1.0, 1.0).value > base);
        assert!(local_time_bound(1.5, 0.5, 1.0, 2.0, 1.0, 1.0, 1.0).value > base);
        assert!(local_time_bound(1.5, 0.5, 2.0, 2.0, 2.0, 1.0, 1.0).value > base);
        assert!(local_time_bound(1.5, 0.5, 2.0, 2.0, 1.0, 2.0, 1.0).value > base);
        assert!(local_time_bound(1.5, 0.5, 2.0, 2.0, 1.0, 1.0, 2.0).value > base);

        let cbase = local_time_bound_convex(2.0, 1.5, 1.0, 1.0, 1.0).value;
        assert!(local_time_bound_convex(2.0, 1.5, 2.0, 1.0, 1.0).value > cbase);
        assert!(local_time_bound_convex(2.0, 1.5, 1.0, 2.0, 1.0).value > cbase);
        assert!(local_time_bound_convex(2.0, 1.5, 1.0, 1.0, 2.0).value > cbase);
        assert!(local_time_bound_convex(1.0, 1.5, 1.0, 1.0, 1.0).value > cbase);
    }
}
