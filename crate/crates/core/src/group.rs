//! The three-dimensional Heisenberg group in two coordinate systems.
//!
//! A point is a triple (x, y, z) with the vertical coordinate last.  The
//! group law is (x, y, z) ∘ (x', y', z') = (x + x', y + y', z + z' + L(x, y; x', y'))
//! where the bilinear form L selects the coordinate model:
//!
//! * [`Model::Polarized`]: L = x·y'.  The integer points form a subgroup,
//!   which is why lattice work happens here.
//! * [`Model::Symmetric`]: L = (x·y' − y·x') / 2.  Rotations about the
//!   vertical axis are group automorphisms, which is why isometry work
//!   happens here.
//!
//! The two models are isomorphic via (x, y, z) ↦ (x, y, z − xy/2), and that
//! map carries the left-invariant frame of one model to the other, so every
//! metric quantity below is model-independent.  Dilations
//! δ_t(x, y, z) = (tx, ty, t²z) are automorphisms in both models.

use serde::{Deserialize, Serialize};
use std::ops::Mul;

/// Coordinate model tag.  Mixed-model arithmetic is a programmer error and
/// panics; convert explicitly with [`GroupPoint::to_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    Polarized,
    Symmetric,
}

impl Model {
    /// Bilinear form in the z-increment of the group law.
    #[inline]
    fn twist(self, x: f64, y: f64, xp: f64, yp: f64) -> f64 {
        match self {
            Model::Polarized => x * yp,
            Model::Symmetric => 0.5 * (x * yp - y * xp),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Model::Polarized => write!(f, "polarized"),
            Model::Symmetric => write!(f, "symmetric"),
        }
    }
}

/// A group element in a tagged coordinate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub model: Model,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GroupPoint {
    pub fn new(model: Model, x: f64, y: f64, z: f64) -> Self {
        GroupPoint { model, x, y, z }
    }

    pub fn polarized(x: f64, y: f64, z: f64) -> Self {
        Self::new(Model::Polarized, x, y, z)
    }

    pub fn symmetric(x: f64, y: f64, z: f64) -> Self {
        Self::new(Model::Symmetric, x, y, z)
    }

    pub fn origin(model: Model) -> Self {
        Self::new(model, 0.0, 0.0, 0.0)
    }

    /// Group inverse.  In the symmetric model the twist is alternating, so
    /// the inverse is plain negation; the polarized model needs the xy
    /// correction.
    pub fn inverse(&self) -> Self {
        match self.model {
            Model::Polarized => Self::polarized(-self.x, -self.y, -self.z + self.x * self.y),
            Model::Symmetric => Self::symmetric(-self.x, -self.y, -self.z),
        }
    }

    /// Homogeneous dilation δ_t(x, y, z) = (tx, ty, t²z), a group
    /// automorphism for every t ≠ 0.
    pub fn dilate(&self, t: f64) -> Self {
        Self::new(self.model, t * self.x, t * self.y, t * t * self.z)
    }

    /// Change coordinate model.  The conversion (x, y, z) ↦ (x, y, z ∓ xy/2)
    /// is a group isomorphism and maps the left-invariant frame of the source
    /// model onto the frame of the target, so it preserves both distances.
    pub fn to_model(&self, target: Model) -> Self {
        if self.model == target {
            return *self;
        }
        let z = match target {
            // polarized -> symmetric
            Model::Symmetric => self.z - 0.5 * self.x * self.y,
            // symmetric -> polarized
            Model::Polarized => self.z + 0.5 * self.x * self.y,
        };
        Self::new(target, self.x, self.y, z)
    }

    /// Vertical coordinate read in the symmetric model.  This is the signed
    /// area swept by the horizontal projection, the quantity controlled by
    /// the isoperimetric inequality, so the norm bounds below use it.
    pub fn vertical_symmetric(&self) -> f64 {
        match self.model {
            Model::Polarized => self.z - 0.5 * self.x * self.y,
            Model::Symmetric => self.z,
        }
    }

    /// Euclidean length of the horizontal projection (x, y).
    pub fn planar_norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Left difference p⁻¹ ∘ q, the displacement of q seen from p.
    pub fn left_delta(&self, q: &GroupPoint) -> Self {
        self.inverse() * *q
    }

    /// Group exponential of a X₁ + b X₂ + c X₃ in the left-invariant frame.
    /// Closed form: (a, b, c + ab/2) in polarized coordinates, hence
    /// (a, b, c) in symmetric coordinates.
    pub fn exp(model: Model, a: f64, b: f64, c: f64) -> Self {
        match model {
            Model::Polarized => Self::polarized(a, b, c + 0.5 * a * b),
            Model::Symmetric => Self::symmetric(a, b, c),
        }
    }

    /// Inverse of [`GroupPoint::exp`]: frame coordinates of the group
    /// logarithm.  Model-independent by construction.
    pub fn log(&self) -> [f64; 3] {
        [self.x, self.y, self.vertical_symmetric()]
    }

    /// Distance of the coordinates from the origin in plain ℝ³, used only
    /// for degeneracy cutoffs.
    pub fn coord_norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl Mul for GroupPoint {
    type Output = GroupPoint;

    /// Group law.  Panics if the operands live in different models.
    fn mul(self, rhs: GroupPoint) -> GroupPoint {
        assert_eq!(
            self.model, rhs.model,
            "group law requires both operands in the same coordinate model"
        );
        GroupPoint::new(
            self.model,
            self.x + rhs.x,
            self.y + rhs.y,
            self.z + rhs.z + self.model.twist(self.x, self.y, rhs.x, rhs.y),
        )
    }
}

/// Integer point of the polarized model.  (m, n, k) ∘ (m', n', k') =
/// (m + m', n + n', k + k' + m·n') closes over ℤ³, so all arithmetic here is
/// exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    pub m: i64,
    pub n: i64,
    pub k: i64,
}

impl LatticePoint {
    pub const IDENTITY: LatticePoint = LatticePoint { m: 0, n: 0, k: 0 };

    pub fn new(m: i64, n: i64, k: i64) -> Self {
        LatticePoint { m, n, k }
    }

    pub fn inverse(&self) -> Self {
        Self::new(-self.m, -self.n, -self.k + self.m * self.n)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Embed into the continuous group, polarized coordinates.
    pub fn embed(&self) -> GroupPoint {
        GroupPoint::polarized(self.m as f64, self.n as f64, self.k as f64)
    }

    /// Integer dilation δ_s with s ∈ ℤ: (m, n, k) ↦ (sm, sn, s²k).
    /// Maps the lattice into itself; the image is the scaled sublattice.
    pub fn dilate_int(&self, s: i64) -> Self {
        Self::new(s * self.m, s * self.n, s * s * self.k)
    }
}

impl Mul for LatticePoint {
    type Output = LatticePoint;

    fn mul(self, rhs: LatticePoint) -> LatticePoint {
        LatticePoint::new(
            self.m + rhs.m,
            self.n + rhs.n,
            self.k + rhs.k + self.m * rhs.n,
        )
    }
}

/// Two-sided bounds on the Carnot-Carathéodory norm N(g) = d_cc(0, g).
///
/// Lower bound: any horizontal path projects to a planar path of the same
/// length, and the vertical coordinate it sweeps is a signed area, so the
/// isoperimetric inequality applied to the path closed by a chord through
/// the origin gives N ≥ √(π |z_sym|).  Upper bound: a straight horizontal
/// segment to (x, y) costs the planar norm and lands at z_sym = 0, and the
/// optimal vertical loop costs 2√(π |z_sym|).
pub fn cc_norm_bounds(g: &GroupPoint) -> (f64, f64) {
    let rho = g.planar_norm();
    let a = g.vertical_symmetric().abs();
    let lower = rho.max((std::f64::consts::PI * a).sqrt());
    let upper = rho + 2.0 * (std::f64::consts::PI * a).sqrt();
    (lower, upper)
}

/// Two-sided bounds on the contraction (Riemannian) norm N_R(g) = d_R(0, g),
/// the distance of the metric that makes the full frame orthonormal.
///
/// Lower: the planar projection argument still applies, and along a unit
/// speed path of length L the vertical speed in the symmetric model is at
/// most s/2 + 1 at arc length s, so |z_sym| ≤ L²/4 + L.  Upper: a straight
/// horizontal segment followed by a vertical one, or the single exponential
/// segment of length |log g|.
pub fn contraction_norm_bounds(g: &GroupPoint) -> (f64, f64) {
    let rho = g.planar_norm();
    let a = g.vertical_symmetric().abs();
    // positive root of L²/4 + L = a
    let vert_lower = 2.0 * ((1.0 + a).sqrt() - 1.0);
    let lower = rho.max(vert_lower);
    let [la, lb, lc] = g.log();
    let log_len = (la * la + lb * lb + lc * lc).sqrt();
    let upper = (rho + a).min(log_len);
    (lower, upper)
}

// TESTS ###############################################################
