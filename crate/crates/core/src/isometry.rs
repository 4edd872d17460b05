//! Isometries of the group: lattice left-translations, rotations about a
//! vertical axis, and their compositions.
//!
//! Left translations preserve the frame by construction.  A rotation of the
//! horizontal plane fixing the center of symmetry is a group automorphism in
//! the symmetric model and rotates X₁, X₂ into each other while fixing X₃,
//! so it too preserves the metric.  Both facts are verified numerically by
//! [`check_infinitesimal_isometry`], which tests the cometric transformation
//! identity dΨ·G·dΨᵀ = G∘Ψ at sampled points rather than trusting the
//! algebra.
//!
//! Conjugation by a dilation sends a lattice translation to a coarser or
//! finer lattice translation and slides a rotation center; it is the
//! algebraic engine behind the self-similar tiling construction.

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{HeisError, Result};
use crate::frame::{cometric, jacobian_fd, Field};
use crate::group::{GroupPoint, Model};

/// A distance-preserving map with a closed-form description.
#[derive(Debug, Clone, PartialEq)]
pub enum Isometry {
    /// p ↦ γ∘p.
    LeftTranslation(GroupPoint),
    /// Rotation of the horizontal plane by `angle` about the vertical axis
    /// through `center`; defined in the symmetric model, where it is a group
    /// automorphism conjugated by a translation.
    RotationVertical { center: GroupPoint, angle: f64 },
    /// Right-to-left composition: the last element acts first.
    Composition(Vec<Isometry>),
}

impl Isometry {
    /// Rotation about the vertical axis through `center`, which must be a
    /// symmetric-model point.
    pub fn rotation_vertical(center: GroupPoint, angle: f64) -> Result<Self> {
        if center.model != Model::Symmetric {
            return Err(HeisError::InvalidParameter(
                "rotation centers live in the symmetric model".into(),
            ));
        }
        Ok(Isometry::RotationVertical { center, angle })
    }

    pub fn identity() -> Self {
        Isometry::LeftTranslation(GroupPoint::origin(Model::Symmetric))
    }

    pub fn inverse(&self) -> Self {
        match self {
            Isometry::LeftTranslation(g) => Isometry::LeftTranslation(g.inverse()),
            Isometry::RotationVertical { center, angle } => {
                Isometry::RotationVertical { center: *center, angle: -angle }
            }
            Isometry::Composition(list) => {
                Isometry::Composition(list.iter().rev().map(|j| j.inverse()).collect())
            }
        }
    }
}

/// Evaluate the isometry.  The result is returned in the model of `p`.
/// Rotations require a symmetric-model input point.
pub fn apply_isometry(j: &Isometry, p: &GroupPoint) -> Result<GroupPoint> {
    match j {
        Isometry::LeftTranslation(g) => Ok(g.to_model(p.model) * *p),
        Isometry::RotationVertical { center, angle } => {
            if p.model != Model::Symmetric {
                return Err(HeisError::InvalidParameter(
                    "rotation applied to a non-symmetric-model point".into(),
                ));
            }
            let q = center.inverse() * *p;
            let (s, c) = angle.sin_cos();
            let rotated =
                GroupPoint::symmetric(c * q.x - s * q.y, s * q.x + c * q.y, q.z);
            Ok(*center * rotated)
        }
        Isometry::Composition(list) => {
            let mut out = *p;
            for j in list.iter().rev() {
                out = apply_isometry(j, &out)?;
            }
            Ok(out)
        }
    }
}

/// Compose two isometries into one value (no simplification).
pub fn compose(a: &Isometry, b: &Isometry) -> Isometry {
    Isometry::Composition(vec![a.clone(), b.clone()])
}

// metric-preservation check ###########################################

/// Residual of the cometric transformation identity for an arbitrary smooth
/// coordinate map at one point: ‖dΨ·G(p)·dΨᵀ − G(Ψp)‖.  Zero exactly when
/// the map is an infinitesimal isometry at p.
pub fn isometry_residual_at<F>(map: &F, model: Model, p: Vector3<f64>) -> f64
where
    F: Fn(Vector3<f64>) -> Vector3<f64> + Sync,
{
    let field = |v: Vector3<f64>| map(v);
    let jac = jacobian_fd(&field as &dyn Field, p, 1e-5);
    let g_here = cometric(&GroupPoint::new(model, p.x, p.y, p.z));
    let image = map(p);
    let g_there = cometric(&GroupPoint::new(model, image.x, image.y, image.z));
    (jac * g_here * jac.transpose() - g_there).norm()
}

/// Max cometric residual of an arbitrary map over `samples` points drawn
/// from a fixed-seed stream in [-1,1]³.  Exposed for negative controls.
pub fn check_map_isometry<F>(
    map: &F,
    model: Model,
    samples: usize,
    tol: f64,
) -> (bool, f64)
where
    F: Fn(Vector3<f64>) -> Vector3<f64> + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x15031); // fixed probe stream
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        worst = worst.max(isometry_residual_at(map, model, p));
    }
    (worst <= tol, worst)
}

/// Verify that an [`Isometry`] satisfies the infinitesimal isometry
/// identity at `samples` random points.  Returns (passed, max residual).
pub fn check_infinitesimal_isometry(j: &Isometry, samples: usize, tol: f64) -> (bool, f64) {
    let model = natural_model(j);
    let map = |v: Vector3<f64>| {
        let p = GroupPoint::new(model, v.x, v.y, v.z);
        let image = apply_isometry(j, &p).expect("model chosen to match the variant");
        Vector3::new(image.x, image.y, image.z)
    };
    check_map_isometry(&map, model, samples, tol)
}

/// The coordinate model in which the variant is defined everywhere.
fn natural_model(j: &Isometry) -> Model {
    match j {
        Isometry::LeftTranslation(g) => g.model,
        Isometry::RotationVertical { .. } => Model::Symmetric,
        Isometry::Composition(list) => {
            if list
                .iter()
                .any(|j| matches!(natural_model(j), Model::Symmetric))
            {
                Model::Symmetric
            } else {
                Model::Polarized
            }
        }
    }
}

// conjugation by dilations ############################################

/// Conjugate by the dilation pair (δ_{1/t}, δ_t): J ↦ δ_{1/t}∘J∘δ_t.
///
/// Both variants conjugate in closed form: a left translation by γ becomes
/// one by δ_{1/t}(γ), and since horizontal rotations commute with dilations
/// a rotation keeps its angle while its center moves to δ_{1/t}(center).
pub fn conjugate_isometry(t: f64, j: &Isometry) -> Result<Isometry> {
    if t <= 0.0 {
        return Err(HeisError::InvalidParameter(format!(
            "dilation parameter must be positive, got {t}"
        )));
    }
    let s = 1.0 / t;
    Ok(match j {
        Isometry::LeftTranslation(g) => Isometry::LeftTranslation(g.dilate(s)),
        Isometry::RotationVertical { center, angle } => {
            Isometry::RotationVertical { center: center.dilate(s), angle: *angle }
        }
        Isometry::Composition(list) => Isometry::Composition(
            list.iter()
                .map(|j| conjugate_isometry(t, j))
                .collect::<Result<Vec<_>>>()?,
        ),
    })
}

// finite groups of isometries #########################################

/// A finite list of isometries verified to be closed under composition and
/// inverse by comparing actions on probe points.
#[derive(Debug, Clone)]
pub struct FiniteGroupAction {
    pub elements: Vec<Isometry>,
}

/// Probe points for deciding equality of isometries numerically.  Generic
/// enough that two distinct closed-form isometries cannot agree on all of
/// them.
fn probe_points() -> Vec<GroupPoint> {
    vec![
        GroupPoint::symmetric(0.0, 0.0, 0.0),
        GroupPoint::symmetric(1.0, 0.0, 0.0),
        GroupPoint::symmetric(0.0, 1.0, 0.0),
        GroupPoint::symmetric(0.3, -0.7, 0.41),
        GroupPoint::symmetric(-1.2, 0.5, -0.9),
    ]
}

fn same_action(a: &Isometry, b: &Isometry, probes: &[GroupPoint]) -> Result<bool> {
    for p in probes {
        let ia = apply_isometry(a, p)?;
        let ib = apply_isometry(b, p)?;
        if ia.left_delta(&ib).coord_norm() > 1e-9 * (1.0 + p.coord_norm()) {
            return Ok(false);
        }
    }
    Ok(true)
}

impl FiniteGroupAction {
    /// Verify closure and inverses by table check; the identity must be
    /// present (as any element acting trivially on the probes).
    pub fn new(elements: Vec<Isometry>) -> Result<Self> {
        if elements.is_empty() {
            return Err(HeisError::EmptySet("a group needs at least the identity".into()));
        }
        let probes = probe_points();
        let find = |target: &Isometry| -> Result<Option<usize>> {
            for (k, e) in elements.iter().enumerate() {
                if same_action(target, e, &probes)? {
                    return Ok(Some(k));
                }
            }
            Ok(None)
        };
        if find(&Isometry::identity())?.is_none() {
            return Err(HeisError::NotAGroup { op: "identity", witness: 0 });
        }
        for (i, a) in elements.iter().enumerate() {
            if find(&a.inverse())?.is_none() {
                return Err(HeisError::NotAGroup { op: "inverse", witness: i });
            }
            for (jdx, b) in elements.iter().enumerate() {
                if find(&compose(a, b))?.is_none() {
                    return Err(HeisError::NotAGroup {
                        op: "composition",
                        witness: i * elements.len() + jdx,
                    });
                }
            }
        }
        Ok(FiniteGroupAction { elements })
    }

    /// The cyclic group of `order` rotations about the vertical axis
    /// through `center`.
    pub fn cyclic_rotations(center: GroupPoint, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(HeisError::InvalidParameter("cyclic group of order 0".into()));
        }
        let elements = (0..order)
            .map(|k| {
                Isometry::rotation_vertical(
                    center,
                    2.0 * std::f64::consts::PI * k as f64 / order as f64,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        FiniteGroupAction::new(elements)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Images of `p` under every element, deduplicated to coordinate
    /// tolerance.
    pub fn orbit(&self, p: &GroupPoint) -> Result<Vec<GroupPoint>> {
        let mut out: Vec<GroupPoint> = Vec::with_capacity(self.elements.len());
        for e in &self.elements {
            let image = apply_isometry(e, p)?;
            let dup = out
                .iter()
                .any(|q| q.left_delta(&image).coord_norm() <= 1e-12 * (1.0 + p.coord_norm()));
            if !dup {
                out.push(image);
            }
        }
        Ok(out)
    }
}

/// An orbit with its diameter in the selected metric.
#[derive(Debug, Clone)]
pub struct OrbitReport {
    pub points: Vec<GroupPoint>,
    pub diameter: f64,
    pub metric: crate::geodesic::Metric,
}

/// Orbit of `p` under `group` with the max pairwise distance.
pub fn orbit_report(
    group: &FiniteGroupAction,
    p: &GroupPoint,
    metric: crate::geodesic::Metric,
) -> Result<OrbitReport> {
    use crate::geodesic::{cc_distance_shoot, contraction_distance_shoot, Metric};
    let points = group.orbit(p)?;
    let mut diameter: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in points.iter().skip(i + 1) {
            let d = match metric {
                Metric::Cc => cc_distance_shoot(a, b),
                Metric::Contraction => contraction_distance_shoot(a, b)?,
            };
            diameter = diameter.max(d);
        }
    }
    Ok(OrbitReport { points, diameter, metric })
}

// TESTS ###############################################################

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{cc_distance_shoot, Metric};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn close(a: &GroupPoint, b: &GroupPoint, tol: f64) -> bool {
        a.left_delta(b).coord_norm() <= tol
    }

    #[test]
    fn translation_moves_the_origin() {
        let j = Isometry::LeftTranslation(GroupPoint::polarized(1.0, 0.0, 0.0));
        let image = apply_isometry(&j, &GroupPoint::origin(Model::Polarized)).unwrap();
        assert_eq!(image, GroupPoint::polarized(1.0, 0.0, 0.0));
    }

    #[test]
    fn quarter_turn_about_origin() {
        let j = Isometry::rotation_vertical(GroupPoint::origin(Model::Symmetric), PI / 2.0)
            .unwrap();
        let image = apply_isometry(&j, &GroupPoint::symmetric(1.0, 0.0, 0.0)).unwrap();
        assert!(close(&image, &GroupPoint::symmetric(0.0, 1.0, 0.0), 1e-15));
    }

    #[test]
    fn rotation_rejects_polarized_points() {
        let j = Isometry::rotation_vertical(GroupPoint::origin(Model::Symmetric), 0.3)
            .unwrap();
        let p = GroupPoint::polarized(0.5, 0.5, 0.1);
        assert!(apply_isometry(&j, &p).is_err());
        assert!(Isometry::rotation_vertical(GroupPoint::polarized(0.0, 0.0, 0.0), 0.3)
            .is_err());
    }

    #[test]
    fn composition_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let j = Isometry::Composition(vec![
            Isometry::rotation_vertical(GroupPoint::symmetric(0.4, -0.2, 0.9), 1.1).unwrap(),
            Isometry::LeftTranslation(GroupPoint::symmetric(-0.3, 0.8, 0.2)),
        ]);
        let round = compose(&j, &j.inverse());
        for _ in 0..20 {
            let p = GroupPoint::symmetric(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let image = apply_isometry(&round, &p).unwrap();
            assert!(close(&image, &p, 1e-12), "{image:?} vs {p:?}");
        }
    }

    #[test]
    fn rotations_preserve_sampled_distances() {
        let j = Isometry::rotation_vertical(GroupPoint::symmetric(0.2, 0.5, -0.3), 0.77)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let p = GroupPoint::symmetric(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let q = GroupPoint::symmetric(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let before = cc_distance_shoot(&p, &q);
            let after = cc_distance_shoot(
                &apply_isometry(&j, &p).unwrap(),
                &apply_isometry(&j, &q).unwrap(),
            );
            assert_relative_eq!(before, after, max_relative = 1e-6);
        }
    }

    #[test]
    fn infinitesimal_identity_holds_for_both_variants() {
        let translation =
            Isometry::LeftTranslation(GroupPoint::polarized(0.7, -1.3, 0.4));
        let (ok, res) = check_infinitesimal_isometry(&translation, 30, 1e-8);
        assert!(ok, "translation residual {res}");

        let rotation = Isometry::rotation_vertical(
            GroupPoint::origin(Model::Symmetric),
            1.234,
        )
        .unwrap();
        let (ok, res) = check_infinitesimal_isometry(&rotation, 30, 1e-6);
        assert!(ok, "rotation residual {res}");
    }

    #[test]
    fn anisotropic_stretch_fails_the_identity() {
        let map = |v: Vector3<f64>| Vector3::new(2.0 * v.x, v.y, v.z);
        let (ok, res) = check_map_isometry(&map, Model::Symmetric, 30, 1e-6);
        assert!(!ok);
        assert!(res > 0.1, "stretch residual should be order one, got {res}");
    }

    #[test]
    fn conjugation_scales_translation_vectors() {
        let j = Isometry::LeftTranslation(GroupPoint::polarized(1.0, 0.0, 0.0));
        let a = conjugate_isometry(0.5, &j).unwrap();
        match a {
            Isometry::LeftTranslation(g) => {
                assert_eq!((g.x, g.y, g.z), (2.0, 0.0, 0.0));
            }
            other => panic!("expected a translation, got {other:?}"),
        }
    }

    #[test]
    fn conjugation_agrees_pointwise_with_its_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let js = [
            Isometry::LeftTranslation(GroupPoint::symmetric(0.3, 1.1, -0.2)),
            Isometry::rotation_vertical(GroupPoint::symmetric(-0.4, 0.0, 0.6), 2.2).unwrap(),
        ];
        for j in &js {
            let a = conjugate_isometry(0.5, j).unwrap();
            for _ in 0..10 {
                let p = GroupPoint::symmetric(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                );
                let lhs = apply_isometry(&a, &p).unwrap();
                let rhs = apply_isometry(j, &p.dilate(0.5)).unwrap().dilate(2.0);
                assert!(close(&lhs, &rhs, 1e-12), "{lhs:?} vs {rhs:?}");
            }
        }
    }

    #[test]
    fn conjugation_is_a_homomorphism_on_sampled_products() {
        let j1 = Isometry::rotation_vertical(GroupPoint::symmetric(0.1, 0.2, 0.0), 0.9)
            .unwrap();
        let j2 = Isometry::LeftTranslation(GroupPoint::symmetric(1.0, -1.0, 0.5));
        let lhs = conjugate_isometry(0.5, &compose(&j1, &j2)).unwrap();
        let rhs = compose(
            &conjugate_isometry(0.5, &j1).unwrap(),
            &conjugate_isometry(0.5, &j2).unwrap(),
        );
        let probes = probe_points();
        assert!(same_action(&lhs, &rhs, &probes).unwrap());
    }

    #[test]
    fn cyclic_rotation_group_passes_the_table_check() {
        let group =
            FiniteGroupAction::cyclic_rotations(GroupPoint::origin(Model::Symmetric), 4)
                .unwrap();
        assert_eq!(group.len(), 4);
        let orbit = group.orbit(&GroupPoint::symmetric(0.5, 0.0, 0.0)).unwrap();
        assert_eq!(orbit.len(), 4);
    }

    #[test]
    fn translation_set_is_rejected_as_a_group() {
        let gamma = GroupPoint::symmetric(1.0, 0.0, 0.0);
        let err = FiniteGroupAction::new(vec![
            Isometry::identity(),
            Isometry::LeftTranslation(gamma),
        ])
        .unwrap_err();
        assert!(matches!(err, HeisError::NotAGroup { .. }), "got {err:?}");
    }

    #[test]
    fn orbit_diameter_of_a_quarter_turn_orbit() {
        let group =
            FiniteGroupAction::cyclic_rotations(GroupPoint::origin(Model::Symmetric), 2)
                .unwrap();
        let report =
            orbit_report(&group, &GroupPoint::symmetric(0.5, 0.0, 0.0), Metric::Cc).unwrap();
        // the two points are (±0.5, 0, 0), a horizontal segment of length 1
        assert_eq!(report.points.len(), 2);
        assert_relative_eq!(report.diameter, 1.0, epsilon = 1e-9);
    }
}
