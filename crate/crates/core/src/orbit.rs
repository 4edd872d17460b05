//! Finite enumeration of lattice-orbit points near a base point.
//!
//! For the integer lattice acting by left translation, the set of γ with
//! d(p₀, γ∘p₀) < ε is finite.  This module enumerates it exhaustively from
//! a completeness box: d(p₀, γ∘p₀) is the norm of the conjugated element
//! p₀⁻¹∘γ∘p₀ = (m, n, k + m·y₀ − n·x₀), whose planar part is (m, n)
//! unchanged, so closed-form norm lower bounds translate directly into
//! coordinate ranges that any qualifying γ must satisfy.  Everything inside
//! the box is then tested with the exact distance solvers.
//!
//! The default box comes from the provable bounds (planar displacement and
//! the isoperimetric vertical estimate); an alternative derives the box
//! from an empirically fitted distance-comparison constant with a safety
//! factor, which is useful as a cross-check but rests on sampled evidence.

use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::geodesic::{cc_distance_shoot, contraction_distance_shoot, Metric};
use crate::group::{GroupPoint, LatticePoint, Model};

/// How the completeness box is derived from ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CompletenessMethod {
    /// Closed-form norm lower bounds; the box is provably complete.
    AnalyticBounds,
    /// Homogeneous-coordinate comparison max(|m|,|n|,|c|^{1/2}) ≤ C·safety·ε
    /// with an empirically fitted C.
    ComparisonConstant { c: f64, safety: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OrbitOptions {
    /// Reject ε above this bound; guards against runaway enumeration.
    pub safety_bound: f64,
    pub method: CompletenessMethod,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions { safety_bound: 10.0, method: CompletenessMethod::AnalyticBounds }
    }
}

/// Enumeration result: the images, the box that was searched (documenting
/// the completeness argument), and how it was derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitEnumeration {
    /// (γ, d(p₀, γ∘p₀)) sorted by distance, identity excluded.
    pub images: Vec<(LatticePoint, f64)>,
    pub metric: Metric,
    pub eps: f64,
    /// Horizontal coordinates satisfied |m|, |n| ≤ this.
    pub planar_range: i64,
    /// The conjugated vertical part satisfied |c_sym| ≤ this.
    pub vertical_bound: f64,
    pub candidates_checked: usize,
    pub method: CompletenessMethod,
}

/// p₀⁻¹ ∘ γ ∘ p₀ in polarized coordinates.
pub fn conjugated_lattice_point(p0: &GroupPoint, gamma: &LatticePoint) -> GroupPoint {
    let p = p0.to_model(Model::Polarized);
    GroupPoint::polarized(
        gamma.m as f64,
        gamma.n as f64,
        gamma.k as f64 + gamma.m as f64 * p.y - gamma.n as f64 * p.x,
    )
}

/// Largest |c_sym| compatible with norm < eps, by inverting the norm lower
/// bound in the vertical coordinate.
pub fn max_vertical_for_norm(metric: Metric, eps: f64) -> f64 {
    match metric {
        // norm ≥ sqrt(pi·|c|)
        Metric::Cc => eps * eps / std::f64::consts::PI,
        // norm ≥ L solving L²/4 + L = |c|
        Metric::Contraction => eps * eps / 4.0 + eps,
    }
}

/// All lattice γ ≠ id with d(p₀, γ∘p₀) < ε, with default options.
pub fn enumerate_orbit_images(
    p0: &GroupPoint,
    eps: f64,
    metric: Metric,
) -> Result<OrbitEnumeration> {
    enumerate_orbit_images_with(p0, eps, metric, &OrbitOptions::default())
}

pub fn enumerate_orbit_images_with(
    p0: &GroupPoint,
    eps: f64,
    metric: Metric,
    options: &OrbitOptions,
) -> Result<OrbitEnumeration> {
    if !(eps > 0.0) {
        return Err(HeisError::InvalidParameter(format!("need positive eps, got {eps}")));
    }
    if eps > options.safety_bound {
        return Err(HeisError::RadiusTooLarge { eps, bound: options.safety_bound });
    }
    let p = p0.to_model(Model::Polarized);

    let (planar_range, c_bound) = match options.method {
        CompletenessMethod::AnalyticBounds => {
            // the planar part of the conjugated element is (m, n) itself and
            // every norm dominates planar displacement
            ((eps * (1.0 + 1e-12)).floor() as i64, max_vertical_for_norm(metric, eps))
        }
        CompletenessMethod::ComparisonConstant { c, safety } => {
            let r = c * safety * eps;
            (r.floor() as i64, r * r)
        }
    };

    let mut images = Vec::new();
    let mut candidates = 0usize;
    for m in -planar_range..=planar_range {
        for n in -planar_range..=planar_range {
            // c_sym of the conjugated element is k + m·y₀ − n·x₀ − m·n/2
            let shift = m as f64 * p.y - n as f64 * p.x - (m * n) as f64 / 2.0;
            let k_lo = (-c_bound - shift - 1e-9).ceil() as i64;
            let k_hi = (c_bound - shift + 1e-9).floor() as i64;
            for k in k_lo..=k_hi {
                let gamma = LatticePoint::new(m, n, k);
                if gamma.is_identity() {
                    continue;
                }
                candidates += 1;
                let conj = conjugated_lattice_point(p0, &gamma);
                let d = match metric {
                    Metric::Cc => cc_distance_shoot(&GroupPoint::origin(Model::Polarized), &conj),
                    Metric::Contraction => contraction_distance_shoot(
                        &GroupPoint::origin(Model::Polarized),
                        &conj,
                    )?,
                };
                if d < eps {
                    images.push((gamma, d));
                }
            }
        }
    }
    images.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap()
            .then_with(|| (a.0.m, a.0.n, a.0.k).cmp(&(b.0.m, b.0.n, b.0.k)))
    });
    Ok(OrbitEnumeration {
        images,
        metric,
        eps,
        planar_range,
        vertical_bound: c_bound,
        candidates_checked: candidates,
        method: options.method,
    })
}

/// Lattice translations are fixed-point-free: γ∘p = p forces γ = id.  The
/// horizontal coordinates determine m = n = 0 and then the vertical gives
/// k = 0.  Returns the unique solution, for use as an explicit check.
pub fn translation_fixing(p: &GroupPoint, gamma: &LatticePoint) -> bool {
    let p = p.to_model(Model::Polarized);
    let moved = gamma.embed() * p;
    moved == p
}

// TESTS ###############################################################
