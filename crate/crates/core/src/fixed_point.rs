//! Common fixed point of a finite isometry group.
//!
//! A finite group of isometries with a bounded orbit has a fixed point near
//! the orbit: the center of the smallest ball containing the orbit is
//! unique in a strongly convex neighborhood and is permuted into itself by
//! the group, hence fixed.  This module searches for that center
//! numerically: first the minimax center of the orbit (a circumcenter
//! computed with the Riemannian-contraction distance), then a polish pass
//! that directly minimizes the worst displacement of the candidate under
//! the group elements.
//!
//! The strong-convexity radius is not computable here; the caller supplies
//! `radius_bound` and the search refuses orbits with diameter above half of
//! it.

use crate::error::{HeisError, Result};
use crate::geodesic::{cc_distance_shoot, contraction_distance_shoot, Metric};
use crate::group::GroupPoint;
use crate::isometry::{apply_isometry, orbit_report, FiniteGroupAction, OrbitReport};
use crate::optimize::{nelder_mead, NelderMeadOptions};

/// Outcome of the fixed-point search.
#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub center: GroupPoint,
    /// max over group elements of d_R(Ψ(center), center).
    pub displacement_contraction: f64,
    /// max over group elements of d(Ψ(center), center).
    pub displacement_cc: f64,
    pub orbit: OrbitReport,
    /// True when the orbit diameter exceeds 40% of the radius bound: the
    /// precondition still holds but without much margin.
    pub near_gate: bool,
}

/// Worst displacement of `x` under the group, in the contraction metric.
/// This is the quantity the returned center is certified against.
pub fn max_displacement(group: &FiniteGroupAction, x: &GroupPoint, metric: Metric) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in &group.elements {
        let image = apply_isometry(e, x)?;
        let d = match metric {
            Metric::Cc => cc_distance_shoot(&image, x),
            Metric::Contraction => contraction_distance_shoot(&image, x)?,
        };
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Find a common fixed point of `group` near the orbit of `p`.
///
/// The orbit diameter (in `metric`) must not exceed half of `radius_bound`;
/// the search then minimizes the minimax contraction distance to the orbit
/// from the coordinate centroid and polishes by minimizing the worst
/// displacement itself.  Fails with `Stagnated` if the final displacement
/// exceeds `tol`.
pub fn fixed_point_center(
    group: &FiniteGroupAction,
    p: &GroupPoint,
    metric: Metric,
    radius_bound: f64,
    tol: f64,
) -> Result<FixedPointReport> {
    if radius_bound <= 0.0 || tol <= 0.0 {
        return Err(HeisError::InvalidParameter(
            "radius bound and tolerance must be positive".into(),
        ));
    }
    let orbit = orbit_report(group, p, metric)?;
    if orbit.diameter > 0.5 * radius_bound {
        return Err(HeisError::OrbitTooSpread {
            diameter: orbit.diameter,
            bound: radius_bound,
        });
    }
    let near_gate = orbit.diameter > 0.4 * radius_bound;
    let model = p.model;

    if orbit.points.len() == 1 {
        // every element fixes p already
        return Ok(FixedPointReport {
            center: *p,
            displacement_contraction: max_displacement(group, p, Metric::Contraction)?,
            displacement_cc: max_displacement(group, p, Metric::Cc)?,
            orbit,
            near_gate,
        });
    }

    let as_point = |x: &[f64]| GroupPoint::new(model, x[0], x[1], x[2]);

    // phase 1: minimax center of the orbit in the contraction metric
    let circumradius = |x: &[f64]| -> f64 {
        let c = as_point(x);
        let mut worst: f64 = 0.0;
        for q in &orbit.points {
            match contraction_distance_shoot(&c, q) {
                Ok(d) => worst = worst.max(d),
                Err(_) => return f64::INFINITY,
            }
        }
        worst
    };
    let centroid = {
        let n = orbit.points.len() as f64;
        let mut c = [0.0; 3];
        for q in &orbit.points {
            c[0] += q.x / n;
            c[1] += q.y / n;
            c[2] += q.z / n;
        }
        c
    };
    let step = (0.1 * (orbit.diameter + 1e-3)).max(1e-4);
    let opts = NelderMeadOptions { max_iters: 4000, init_step: step, tol: 1e-13 };
    let (x1, _) = nelder_mead(circumradius, &centroid, &opts);

    // phase 2: polish against the certified quantity, the worst
    // displacement under the group itself
    let displacement = |x: &[f64]| -> f64 {
        max_displacement(group, &as_point(x), Metric::Contraction).unwrap_or(f64::INFINITY)
    };
    let polish_opts = NelderMeadOptions {
        max_iters: 4000,
        init_step: (0.01 * (orbit.diameter + 1e-3)).max(1e-6),
        tol: 1e-14,
    };
    let (x2, best) = nelder_mead(displacement, &x1, &polish_opts);

    if best > tol {
        return Err(HeisError::Stagnated { residual: best, tol });
    }
    let center = as_point(&x2);
    Ok(FixedPointReport {
        center,
        displacement_contraction: best,
        displacement_cc: max_displacement(group, &center, Metric::Cc)?,
        orbit,
        near_gate,
    })
}

// TESTS ###############################################################

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Model;
    use crate::isometry::Isometry;

    fn c4() -> FiniteGroupAction {
        FiniteGroupAction::cyclic_rotations(GroupPoint::origin(Model::Symmetric), 4).unwrap()
    }

    #[test]
    fn quarter_turn_group_fixes_an_axis_point() {
        let p = GroupPoint::symmetric(0.1, 0.0, 0.0);
        let report = fixed_point_center(&c4(), &p, Metric::Contraction, 1.0, 1e-6).unwrap();
        assert!(report.displacement_contraction <= 1e-6);
        assert!(report.displacement_cc <= 1e-4);
        // the fixed set of the rotations is the vertical axis
        assert!(report.center.x.abs() < 1e-5, "center {:?}", report.center);
        assert!(report.center.y.abs() < 1e-5, "center {:?}", report.center);
    }

    #[test]
    fn identity_group_returns_the_seed() {
        let group = FiniteGroupAction::new(vec![Isometry::identity()]).unwrap();
        let p = GroupPoint::symmetric(0.4, -0.8, 0.3);
        let report = fixed_point_center(&group, &p, Metric::Contraction, 1.0, 1e-9).unwrap();
        assert_eq!(report.center, p);
        assert_eq!(report.displacement_contraction, 0.0);
    }

    #[test]
    fn wide_orbits_are_rejected_by_the_gate() {
        let p = GroupPoint::symmetric(3.0, 0.0, 0.0);
        let err = fixed_point_center(&c4(), &p, Metric::Contraction, 1.0, 1e-6).unwrap_err();
        assert!(matches!(err, HeisError::OrbitTooSpread { .. }), "got {err:?}");
    }

    #[test]
    fn off_axis_rotation_center_is_recovered() {
        let axis = GroupPoint::symmetric(0.3, -0.2, 0.5);
        let group = FiniteGroupAction::cyclic_rotations(axis, 3).unwrap();
        let p = GroupPoint::symmetric(0.42, -0.2, 0.5);
        let report = fixed_point_center(&group, &p, Metric::Contraction, 1.0, 1e-6).unwrap();
        assert!(report.displacement_contraction <= 1e-6);
        assert!((report.center.x - axis.x).abs() < 1e-4, "center {:?}", report.center);
        assert!((report.center.y - axis.y).abs() < 1e-4, "center {:?}", report.center);
    }

    #[test]
    fn result_is_stable_under_element_reordering() {
        let mut elements = c4().elements;
        elements.swap(1, 3);
        elements.swap(0, 2);
        let permuted = FiniteGroupAction::new(elements).unwrap();
        let p = GroupPoint::symmetric(0.1, 0.05, 0.0);
        let a = fixed_point_center(&c4(), &p, Metric::Contraction, 1.0, 1e-6).unwrap();
        let b = fixed_point_center(&permuted, &p, Metric::Contraction, 1.0, 1e-6).unwrap();
        // the fixed set of a vertical rotation is a whole line, so the
        // displacement objective is flat along the axis and the reported
        // center may slide a little on it; both must still be certified
        assert!(a.displacement_contraction <= 1e-6);
        assert!(b.displacement_contraction <= 1e-6);
        let gap = a.center.left_delta(&b.center).coord_norm();
        assert!(gap <= 1e-3, "centers differ by {gap}");
        assert!((a.center.x - b.center.x).abs() <= 1e-5);
        assert!((a.center.y - b.center.y).abs() <= 1e-5);
    }
}
