//! Dirichlet fundamental domains for the integer lattice.
//!
//! The Dirichlet cell of a base point p₀ is the intersection of the
//! half-spaces {q : d(q, p₀) < d(q, γ∘p₀)} over the nontrivial lattice
//! translations γ.  Only finitely many translations matter on a bounded
//! grid: if some γ∘p₀ beats p₀ at a point q then the triangle inequality
//! gives d(p₀, γ∘p₀) ≤ 2·d(q, p₀), so enumerating orbit images out to
//! twice the grid circumradius is exhaustive.  Cells are classified by
//! their centers; numerical ties go to the cell, so the result is the
//! closure of the open cell up to grid resolution.
//!
//! The verification half implements the fundamental-set axioms on a voxel
//! grid: the set should equal the closure of its interior (morphological
//! opening), its lattice translates should cover a window, and distinct
//! translates should have disjoint interiors.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::geodesic::{cc_norm_shot, contraction_norm_shot, Metric};
use crate::group::{cc_norm_bounds, contraction_norm_bounds, GroupPoint, Model};
use crate::orbit::{
    enumerate_orbit_images_with, max_vertical_for_norm, CompletenessMethod, OrbitEnumeration,
    OrbitOptions,
};
use crate::voxel::{Bounds3, VoxelSet};

/// Minimum cells per axis for Dirichlet grids; coarser grids misplace the
/// boundary by more than the typical half-space gap.
pub const MIN_DIRICHLET_RES: usize = 32;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DirichletSpec {
    pub base_point: GroupPoint,
    pub metric: Metric,
    /// The grid must contain a metric ball of at least this radius around
    /// the base point.
    pub enumeration_radius: f64,
    /// Centers with |d(q,p₀) − d(q,γp₀)| below this (relative) band count
    /// as inside, so the output is the closed cell.
    pub tie_tolerance: f64,
}

impl DirichletSpec {
    pub fn new(base_point: GroupPoint, metric: Metric, enumeration_radius: f64) -> Self {
        DirichletSpec { base_point, metric, enumeration_radius, tie_tolerance: 1e-9 }
    }
}

/// Dirichlet cell voxelization together with the rival enumeration that
/// certifies it.
#[derive(Debug, Clone)]
pub struct DirichletCell {
    pub cell: VoxelSet,
    pub rivals: OrbitEnumeration,
    /// ε used for rival enumeration: twice the metric circumradius of the
    /// grid box about the base point (safe corner upper bound).
    pub rival_radius: f64,
}

fn norm(metric: Metric, g: &GroupPoint) -> f64 {
    match metric {
        Metric::Cc => cc_norm_shot(g).length,
        Metric::Contraction => {
            contraction_norm_shot(g).expect("contraction norm solver failed").length
        }
    }
}

fn norm_lower_bound(metric: Metric, g: &GroupPoint) -> f64 {
    match metric {
        Metric::Cc => cc_norm_bounds(g).0,
        Metric::Contraction => contraction_norm_bounds(g).0,
    }
}

/// Upper bound for max_{q ∈ box} d(p₀, q).  The planar part of p₀⁻¹∘q is
/// convex in q and the symmetric vertical part is multilinear, so both are
/// extremal at box corners; the closed-form norm upper bound is monotone in
/// either argument.
fn circumradius_upper_bound(p0: &GroupPoint, bounds: &Bounds3, metric: Metric) -> f64 {
    let p = p0.to_model(Model::Polarized);
    let mut rho_max: f64 = 0.0;
    let mut c_max: f64 = 0.0;
    for cx in 0..2 {
        for cy in 0..2 {
            for cz in 0..2 {
                let q = GroupPoint::polarized(
                    if cx == 0 { bounds.lo[0] } else { bounds.hi[0] },
                    if cy == 0 { bounds.lo[1] } else { bounds.hi[1] },
                    if cz == 0 { bounds.lo[2] } else { bounds.hi[2] },
                );
                let g = p.left_delta(&q);
                rho_max = rho_max.max(g.planar_norm());
                c_max = c_max.max(g.vertical_symmetric().abs());
            }
        }
    }
    match metric {
        Metric::Cc => rho_max + 2.0 * (std::f64::consts::PI * c_max).sqrt(),
        Metric::Contraction => rho_max + c_max,
    }
}

/// Coordinate extents of the metric ball of radius r about p₀, for the
/// grid-size precondition.  In polarized coordinates q = p₀∘g the planar
/// offsets are those of g and the vertical offset is x₀·g_y + g_z.
fn ball_extent(p0: &GroupPoint, r: f64, metric: Metric) -> [f64; 3] {
    let p = p0.to_model(Model::Polarized);
    let c = max_vertical_for_norm(metric, r);
    [r, r, p.x.abs() * r + c + 0.5 * r * r]
}

/// Membership test for one point against a rival list sorted by orbit
/// distance.  A rival can only exclude q when d(p₀,γp₀) ≤ 2·d(q,p₀), so the
/// scan stops early; closed-form lower bounds skip most exact solves.
pub fn cell_contains(
    spec: &DirichletSpec,
    rivals: &[(GroupPoint, f64)],
    q: Vector3<f64>,
) -> bool {
    let p0 = spec.base_point.to_model(Model::Polarized);
    let qp = GroupPoint::polarized(q[0], q[1], q[2]);
    let dq = norm(spec.metric, &p0.left_delta(&qp));
    let tol = spec.tie_tolerance * (1.0 + dq);
    for (rp, orbit_dist) in rivals {
        if *orbit_dist > 2.0 * dq + tol {
            break;
        }
        let g = rp.left_delta(&qp);
        if norm_lower_bound(spec.metric, &g) >= dq - tol {
            continue;
        }
        if norm(spec.metric, &g) < dq - tol {
            return false;
        }
    }
    true
}

/// Precompute the rival points γ∘p₀ in classification order.
pub fn rival_points(p0: &GroupPoint, images: &OrbitEnumeration) -> Vec<(GroupPoint, f64)> {
    let p = p0.to_model(Model::Polarized);
    images.images.iter().map(|(g, d)| (g.embed() * p, *d)).collect()
}

/// Dirichlet cell of the lattice action on a voxel grid.
pub fn dirichlet_cell(
    spec: &DirichletSpec,
    bounds: Bounds3,
    res: [usize; 3],
) -> Result<DirichletCell> {
    for (axis, &cells) in res.iter().enumerate() {
        if cells < MIN_DIRICHLET_RES {
            return Err(HeisError::GridTooCoarse { axis, cells, min: MIN_DIRICHLET_RES });
        }
    }
    if !(spec.enumeration_radius > 0.0) {
        return Err(HeisError::InvalidParameter(format!(
            "enumeration radius must be positive, got {}",
            spec.enumeration_radius
        )));
    }
    let p0 = spec.base_point.to_model(Model::Polarized);
    let extent = ball_extent(&p0, spec.enumeration_radius, spec.metric);
    for a in 0..3 {
        let c = [p0.x, p0.y, p0.z][a];
        if c - extent[a] < bounds.lo[a] || c + extent[a] > bounds.hi[a] {
            return Err(HeisError::GridTooSmall {
                detail: format!(
                    "axis {a}: ball of radius {} around the base point spans \
                     [{:.3}, {:.3}] but the grid covers [{:.3}, {:.3}]",
                    spec.enumeration_radius,
                    c - extent[a],
                    c + extent[a],
                    bounds.lo[a],
                    bounds.hi[a]
                ),
            });
        }
    }

    let eps = 2.0 * circumradius_upper_bound(&p0, &bounds, spec.metric) * (1.0 + 1e-9);
    let images = enumerate_orbit_images_with(
        &p0,
        eps,
        spec.metric,
        &OrbitOptions { safety_bound: eps, method: CompletenessMethod::AnalyticBounds },
    )?;
    let rivals = rival_points(&p0, &images);

    let cell = VoxelSet::from_fn(bounds, res, Model::Polarized, |center| {
        cell_contains(spec, &rivals, center)
    })?;
    Ok(DirichletCell { cell, rivals: images, rival_radius: eps })
}

// FUNDAMENTAL SET VERIFICATION ########################################

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FundamentalSetReport {
    /// measure(F Δ opening(F)) / measure(F): how far F is from being the
    /// closure of its interior, morphologically.
    pub closure_defect: f64,
    /// Fraction of window sample points covered by some lattice translate.
    pub covering_fraction: f64,
    /// Fraction of window sample points interior to two distinct translates.
    pub overlap_fraction: f64,
    pub samples: usize,
    pub measure: f64,
    pub lattice_range: i64,
    /// Largest number of translates containing one sample point.
    pub max_multiplicity: usize,
}

/// Count lattice translates L_γ(F) containing w, enumerating only the γ
/// that can map w into the occupied bounding box of F.  γ⁻¹∘w has planar
/// part (w_x − m, w_y − n) and vertical part w_z − k + m·n − m·w_y, so per
/// (m, n) the candidate k fill one short interval.
pub(crate) fn translate_multiplicity(
    f_set: &VoxelSet,
    occupied: &Bounds3,
    w: Vector3<f64>,
    range: i64,
) -> usize {
    let mut mult = 0usize;
    let m_lo = ((w[0] - occupied.hi[0]).ceil() as i64).max(-range);
    let m_hi = ((w[0] - occupied.lo[0]).floor() as i64).min(range);
    let n_lo = ((w[1] - occupied.hi[1]).ceil() as i64).max(-range);
    let n_hi = ((w[1] - occupied.lo[1]).floor() as i64).min(range);
    for m in m_lo..=m_hi {
        for n in n_lo..=n_hi {
            let base = w[2] + (m * n) as f64 - m as f64 * w[1];
            let k_lo = (base - occupied.hi[2]).ceil() as i64;
            let k_hi = (base - occupied.lo[2]).floor() as i64;
            for k in k_lo..=k_hi {
                let inv = Vector3::new(w[0] - m as f64, w[1] - n as f64, base - k as f64);
                if f_set.contains_point(inv) {
                    mult += 1;
                }
            }
        }
    }
    mult
}

/// Check the fundamental-set axioms for F under the lattice action.
pub fn verify_fundamental_set(
    f_set: &VoxelSet,
    window: Bounds3,
    lattice_range: i64,
) -> Result<FundamentalSetReport> {
    if f_set.is_empty() {
        return Err(HeisError::EmptySet("fundamental set candidate has no cells".into()));
    }
    if f_set.model != Model::Polarized {
        return Err(HeisError::InvalidParameter(
            "lattice translates are integer affine maps in polarized coordinates only".into(),
        ));
    }
    let opening = f_set.erode6().dilate6();
    let closure_defect = f_set.symdiff(&opening).measure() / f_set.measure();

    let interior = f_set.erode6();
    let occupied = f_set.occupied_bounds().expect("nonempty set has occupied bounds");
    let occupied_interior = interior.occupied_bounds();

    // Uniform random samples with a fixed seed.  A sample grid tied to the
    // voxel pitch is nearly commensurate with it, so the intra-cell phase of
    // the samples drifts slowly and whole runs of samples land inside the
    // rasterization band at translate interfaces, inflating the mismatch
    // fractions several-fold.  Random positions make the estimate unbiased
    // regardless of grid alignment.
    let n_samples = 300_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a3c_71e5);
    let points: Vec<Vector3<f64>> = (0..n_samples).map(|_| window.sample_uniform(&mut rng)).collect();

    let stats = points
        .into_par_iter()
        .map(|w| {
            let mult = translate_multiplicity(f_set, &occupied, w, lattice_range);
            let interior_mult = match &occupied_interior {
                Some(ob) => translate_multiplicity(&interior, ob, w, lattice_range),
                None => 0,
            };
            (usize::from(mult >= 1), usize::from(interior_mult >= 2), mult)
        })
        .collect::<Vec<_>>();

    let covered: usize = stats.iter().map(|s| s.0).sum();
    let overlapped: usize = stats.iter().map(|s| s.1).sum();
    let max_multiplicity = stats.iter().map(|s| s.2).max().unwrap_or(0);

    Ok(FundamentalSetReport {
        closure_defect,
        covering_fraction: covered as f64 / n_samples as f64,
        overlap_fraction: overlapped as f64 / n_samples as f64,
        samples: n_samples,
        measure: f_set.measure(),
        lattice_range,
        max_multiplicity,
    })
}

// TESTS ###############################################################

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::LatticePoint;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base_spec() -> DirichletSpec {
        DirichletSpec::new(
            GroupPoint::polarized(0.5, 0.5, 0.5),
            Metric::Contraction,
            0.9,
        )
    }

    fn cell_bounds() -> Bounds3 {
        Bounds3::new([-1.1, -1.1, -1.9], [2.1, 2.1, 2.9])
    }

    #[test]
    fn empty_rival_list_keeps_the_whole_grid() {
        // trivial group: the intersection over no half-spaces is everything
        let spec = base_spec();
        let cell = VoxelSet::from_fn(cell_bounds(), [32, 32, 32], Model::Polarized, |c| {
            cell_contains(&spec, &[], c)
        })
        .unwrap();
        assert_eq!(cell.count(), 32 * 32 * 32);
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let err = dirichlet_cell(&base_spec(), cell_bounds(), [16, 64, 64]).unwrap_err();
        assert!(matches!(err, HeisError::GridTooCoarse { axis: 0, .. }));
    }

    #[test]
    fn undersized_grids_are_rejected() {
        let b = Bounds3::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let err = dirichlet_cell(&base_spec(), b, [32, 32, 32]).unwrap_err();
        assert!(matches!(err, HeisError::GridTooSmall { .. }));
    }

    #[test]
    fn base_point_is_always_inside() {
        let spec = base_spec();
        let dc = dirichlet_cell(&spec, cell_bounds(), [32, 32, 32]).unwrap();
        assert!(dc.cell.contains_point(Vector3::new(0.5, 0.5, 0.5)));
        assert!(!dc.rivals.images.is_empty());
    }

    #[test]
    fn contraction_cell_measure_is_near_the_covolume() {
        let dc = dirichlet_cell(&base_spec(), cell_bounds(), [64, 64, 64]).unwrap();
        let measure = dc.cell.measure();
        assert!((measure - 1.0).abs() < 0.05, "measure {measure}");
    }

    #[test]
    fn cell_is_invariant_under_moving_the_base_point() {
        // classifications of D(p0) at w and of D(gamma p0) at gamma w agree
        let spec = base_spec();
        let gamma = LatticePoint::new(1, 0, -1);
        let moved_base = gamma.embed() * spec.base_point;
        let moved = DirichletSpec { base_point: moved_base, ..spec };

        let eps = 6.0;
        let opts = OrbitOptions { safety_bound: eps, method: CompletenessMethod::AnalyticBounds };
        let rivals0 = rival_points(
            &spec.base_point,
            &enumerate_orbit_images_with(&spec.base_point, eps, spec.metric, &opts).unwrap(),
        );
        let rivals1 = rival_points(
            &moved_base,
            &enumerate_orbit_images_with(&moved_base, eps, spec.metric, &opts).unwrap(),
        );

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        for _ in 0..60 {
            let w = Vector3::new(
                rng.gen_range(-0.6..1.6),
                rng.gen_range(-0.6..1.6),
                rng.gen_range(-1.0..2.0),
            );
            let wp = GroupPoint::polarized(w[0], w[1], w[2]);
            let moved_w = gamma.embed() * wp;
            // skip points close to a half-space boundary, where a tie could
            // be resolved differently on the two sides
            let d0 = norm(spec.metric, &spec.base_point.left_delta(&wp));
            let margin = rivals0
                .iter()
                .map(|(rp, _)| (norm(spec.metric, &rp.left_delta(&wp)) - d0).abs())
                .fold(f64::INFINITY, f64::min);
            if margin < 1e-3 {
                continue;
            }
            checked += 1;
            assert_eq!(
                cell_contains(&spec, &rivals0, w),
                cell_contains(&moved, &rivals1, Vector3::new(moved_w.x, moved_w.y, moved_w.z)),
            );
        }
        assert!(checked > 30);
    }

    #[test]
    fn unit_cube_is_an_exact_fundamental_domain() {
        let b = Bounds3::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let cube = VoxelSet::full(b, [128, 128, 128], Model::Polarized).unwrap();
        let window = Bounds3::new([-0.5, -0.5, -0.5], [1.5, 1.5, 1.5]);
        let report = verify_fundamental_set(&cube, window, 2).unwrap();
        assert!(report.covering_fraction >= 0.999, "covering {}", report.covering_fraction);
        assert!(report.overlap_fraction <= 0.001, "overlap {}", report.overlap_fraction);
        assert!(report.closure_defect < 0.01);
        assert_eq!(report.max_multiplicity, 1);
    }

    #[test]
    fn half_cube_fails_the_covering_axiom() {
        let b = Bounds3::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let half = VoxelSet::from_fn(b, [64, 64, 64], Model::Polarized, |c| c[2] < 0.5).unwrap();
        let window = Bounds3::new([-0.5, -0.5, -0.5], [1.5, 1.5, 1.5]);
        let report = verify_fundamental_set(&half, window, 2).unwrap();
        assert!((report.covering_fraction - 0.5).abs() < 0.05, "{}", report.covering_fraction);
    }

    #[test]
    fn dirichlet_cell_passes_fundamental_set_checks() {
        // boundary rasterization leaves a gap band that thins with the grid;
        // at 64³ over this box the honest covering sits near 0.98, and it
        // clears 0.99 from 96³ up
        let dc = dirichlet_cell(&base_spec(), cell_bounds(), [64, 64, 64]).unwrap();
        let window = Bounds3::new([-0.5, -0.5, -0.5], [1.5, 1.5, 1.5]);
        let report = verify_fundamental_set(&dc.cell, window, 3).unwrap();
        assert!(report.covering_fraction >= 0.975, "covering {}", report.covering_fraction);
        assert!(report.overlap_fraction <= 0.01, "overlap {}", report.overlap_fraction);
    }

    #[test]
    fn empty_candidate_is_rejected() {
        let b = Bounds3::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let empty = VoxelSet::empty(b, [32, 32, 32], Model::Polarized).unwrap();
        let err = verify_fundamental_set(&empty, b, 1).unwrap_err();
        assert!(matches!(err, HeisError::EmptySet(_)));
    }
}
