//! Flows of frame fields and the commutator-of-flows identity.
//!
//! Flowing along a left-invariant field for time t is right multiplication
//! by exp(t·u), so frame flows are exact group operations.  The square loop
//!
//!   e^{−tY} e^{−tX} e^{tY} e^{tX}
//!
//! applied to a point returns it displaced by t²[X, Y] up to a third-order
//! error.  For the horizontal frame pair the error vanishes identically
//! (the group is 2-step nilpotent), which gives an exact oracle; for
//! perturbed smooth fields the residual decays like t³ and the decay order
//! is measured by a log-log fit.

use crate::frame::{jacobian_fd, Field};
use crate::group::{GroupPoint, Model};
use nalgebra::Vector3;

/// Exact flow of the left-invariant field u₁X₁ + u₂X₂ + u₃X₃ for time t.
pub fn flow_frame(p: &GroupPoint, u: [f64; 3], t: f64) -> GroupPoint {
    *p * GroupPoint::exp(p.model, t * u[0], t * u[1], t * u[2])
}

/// Classical fixed-step RK4 for a coordinate field.
pub fn flow_rk4(f: &dyn Field, start: Vector3<f64>, t: f64, steps: usize) -> Vector3<f64> {
    assert!(steps > 0);
    let h = t / steps as f64;
    let mut p = start;
    for _ in 0..steps {
        let k1 = f.eval(p);
        let k2 = f.eval(p + 0.5 * h * k1);
        let k3 = f.eval(p + 0.5 * h * k2);
        let k4 = f.eval(p + h * k3);
        p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    p
}

/// Endpoint of the square loop of two coordinate fields from `start`,
/// minus the second-order prediction start + t²[X, Y](start).
pub fn commutator_residual_of_fields(
    x: &dyn Field,
    y: &dyn Field,
    start: Vector3<f64>,
    t: f64,
    steps: usize,
) -> Vector3<f64> {
    let p1 = flow_rk4(x, start, t, steps);
    let p2 = flow_rk4(y, p1, t, steps);
    let p3 = flow_rk4(x, p2, -t, steps);
    let p4 = flow_rk4(y, p3, -t, steps);
    let jx = jacobian_fd(x, start, 1e-5);
    let jy = jacobian_fd(y, start, 1e-5);
    let bracket = jy * x.eval(start) - jx * y.eval(start);
    p4 - (start + t * t * bracket)
}

/// Pinned smooth perturbation of the horizontal pair, used to demonstrate
/// that the third-order error term is genuinely present once nilpotency is
/// broken.  Both fields agree with X₁, X₂ at the origin.
pub fn perturbed_test_fields() -> (
    impl Fn(Vector3<f64>) -> Vector3<f64> + Sync,
    impl Fn(Vector3<f64>) -> Vector3<f64> + Sync,
) {
    let x = |v: Vector3<f64>| {
        Vector3::new(
            1.0 + 0.3 * v.y.sin(),
            0.2 * v.z,
            0.1 - 0.1 * v.x.cos() + 0.15 * v.y,
        )
    };
    let y = |v: Vector3<f64>| {
        Vector3::new(
            0.15 * v.z.sin(),
            1.0 + 0.25 * v.x.sin(),
            v.x + 0.2 * v.y,
        )
    };
    (x, y)
}

/// Square-loop residual for the standard structure.
///
/// With `horizontal = true` the loop uses the exact flows of X₁ and X₂ from
/// the origin and the result is the endpoint minus exp(t²X₃); nilpotency
/// makes it exactly zero.  With `horizontal = false` the loop integrates the
/// pinned perturbed fields numerically and the residual is O(t³).
pub fn commutator_flow_residual(model: Model, t: f64, horizontal: bool) -> Vector3<f64> {
    if horizontal {
        let o = GroupPoint::origin(model);
        let p = flow_frame(&o, [1.0, 0.0, 0.0], t);
        let p = flow_frame(&p, [0.0, 1.0, 0.0], t);
        let p = flow_frame(&p, [1.0, 0.0, 0.0], -t);
        let p = flow_frame(&p, [0.0, 1.0, 0.0], -t);
        let want = GroupPoint::exp(model, 0.0, 0.0, t * t);
        Vector3::new(p.x - want.x, p.y - want.y, p.z - want.z)
    } else {
        let (x, y) = perturbed_test_fields();
        let steps = 400;
        commutator_residual_of_fields(&x, &y, Vector3::zeros(), t, steps)
    }
}

/// Least-squares slope of log r against log t.  Decay order of the residual.
pub fn log_log_slope(ts: &[f64], rs: &[f64]) -> f64 {
    assert_eq!(ts.len(), rs.len());
    assert!(ts.len() >= 2);
    let n = ts.len() as f64;
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

// TESTS ###############################################################

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn horizontal_square_loop_is_exact() {
        for model in [Model::Polarized, Model::Symmetric] {
            for t in [0.2, 0.1, 0.05, 0.017] {
                let r = commutator_flow_residual(model, t, true);
                assert_eq!(r, Vector3::zeros(), "model {model}, t {t}");
            }
        }
    }

    #[test]
    fn square_loop_endpoint_is_the_vertical_exponential() {
        // the loop itself, not just the residual: endpoint = (0, 0, t²)
        let t = 0.1;
        let o = GroupPoint::origin(Model::Polarized);
        let p = flow_frame(&o, [1.0, 0.0, 0.0], t);
        let p = flow_frame(&p, [0.0, 1.0, 0.0], t);
        let p = flow_frame(&p, [1.0, 0.0, 0.0], -t);
        let p = flow_frame(&p, [0.0, 1.0, 0.0], -t);
        assert_eq!((p.x, p.y), (0.0, 0.0));
        assert_relative_eq!(p.z, 0.01, epsilon = 1e-16);
    }

    #[test]
    fn rk4_reproduces_exact_frame_flows() {
        use crate::frame::frame_field;
        for model in [Model::Polarized, Model::Symmetric] {
            let start = GroupPoint::new(model, 0.3, -0.2, 0.5);
            let exact = flow_frame(&start, [0.0, 1.0, 0.0], 0.7);
            let f = frame_field(model, 1);
            let num = flow_rk4(&f, Vector3::new(start.x, start.y, start.z), 0.7, 64);
            assert_relative_eq!(num.x, exact.x, epsilon = 1e-12);
            assert_relative_eq!(num.y, exact.y, epsilon = 1e-12);
            assert_relative_eq!(num.z, exact.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn perturbed_fields_agree_with_frame_at_origin() {
        let (x, y) = perturbed_test_fields();
        assert_relative_eq!(x(Vector3::zeros()), Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(y(Vector3::zeros()), Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn perturbed_residual_decays_at_third_order() {
        let ts = [0.2, 0.1, 0.05, 0.025];
        let rs: Vec<f64> = ts
            .iter()
            .map(|&t| commutator_flow_residual(Model::Polarized, t, false).norm())
            .collect();
        for r in &rs {
            assert!(*r > 0.0, "residual must be nonzero for perturbed fields");
        }
        let slope = log_log_slope(&ts, &rs);
        assert!(slope >= 2.9, "decay order {slope}");
    }

    #[test]
    fn slope_fit_recovers_a_pure_power() {
        let ts = [0.4, 0.2, 0.1, 0.05];
        let rs: Vec<f64> = ts.iter().map(|t: &f64| 3.7 * t.powi(3)).collect();
        assert_relative_eq!(log_log_slope(&ts, &rs), 3.0, epsilon = 1e-12);
    }
}
