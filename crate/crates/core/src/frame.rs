//! Left-invariant frame, cometric, and bracket-generation checks.
//!
//! The frame {X₁, X₂, X₃} is the left translate of the coordinate basis at
//! the origin.  In coordinates:
//!
//! * polarized:  X₁ = ∂x,            X₂ = ∂y + x ∂z,      X₃ = ∂z
//! * symmetric:  X₁ = ∂x − (y/2) ∂z, X₂ = ∂y + (x/2) ∂z,  X₃ = ∂z
//!
//! The horizontal distribution is span{X₁, X₂}; its single bracket
//! [X₁, X₂] = X₃ already spans the missing direction, so the distribution is
//! bracket generating with step 2 everywhere.  The cometric of the
//! sub-Riemannian structure is B_S·B_Sᵀ where B_S holds the two horizontal
//! columns; it has rank 2 in coordinates and becomes diag(1, 1, 0) when
//! written in the frame basis.

use crate::group::{GroupPoint, Model};
use nalgebra::{Matrix3, Matrix3x2, Vector3};

/// Frame matrix at a base point: column j is X_{j+1} evaluated there.
/// det = 1 at every point and the matrix is the identity at the origin.
#[derive(Debug, Clone, Copy)]
pub struct FrameMatrix {
    pub base: GroupPoint,
    pub cols: Matrix3<f64>,
}

impl FrameMatrix {
    pub fn at(p: &GroupPoint) -> Self {
        let cols = match p.model {
            Model::Polarized => {
                Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, p.x, 1.0)
            }
            Model::Symmetric => {
                Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -0.5 * p.y, 0.5 * p.x, 1.0)
            }
        };
        FrameMatrix { base: *p, cols }
    }

    /// The two horizontal columns.
    pub fn horizontal(&self) -> Matrix3x2<f64> {
        let c0: Vector3<f64> = self.cols.column(0).into_owned();
        let c1: Vector3<f64> = self.cols.column(1).into_owned();
        Matrix3x2::from_columns(&[c0, c1])
    }

    pub fn det(&self) -> f64 {
        self.cols.determinant()
    }

    /// Coordinates of a frame vector a X₁ + b X₂ + c X₃ at the base point.
    pub fn push(&self, a: f64, b: f64, c: f64) -> Vector3<f64> {
        self.cols * Vector3::new(a, b, c)
    }
}

/// Convenience: the frame columns at p.
pub fn left_invariant_frame(p: &GroupPoint) -> Matrix3<f64> {
    FrameMatrix::at(p).cols
}

/// Sub-Riemannian cometric in coordinates: B_S·B_Sᵀ, rank 2.
pub fn cometric(p: &GroupPoint) -> Matrix3<f64> {
    let b = FrameMatrix::at(p).horizontal();
    b * b.transpose()
}

/// The cometric rewritten in the frame basis, E⁻¹ G E⁻ᵀ.  Equals
/// diag(1, 1, 0) exactly in exact arithmetic; a numerical rank-2 check reads
/// its eigenvalues.
pub fn cometric_in_frame_basis(p: &GroupPoint) -> Matrix3<f64> {
    let e = FrameMatrix::at(p).cols;
    let e_inv = e.try_inverse().expect("frame matrix is unimodular");
    e_inv * cometric(p) * e_inv.transpose()
}

/// A smooth coordinate vector field on ℝ³.
pub trait Field: Sync {
    fn eval(&self, p: Vector3<f64>) -> Vector3<f64>;
}

impl<F: Fn(Vector3<f64>) -> Vector3<f64> + Sync> Field for F {
    fn eval(&self, p: Vector3<f64>) -> Vector3<f64> {
        self(p)
    }
}

/// Frame field X_i of the chosen model as a coordinate field (i ∈ {0,1,2}).
pub fn frame_field(model: Model, i: usize) -> impl Fn(Vector3<f64>) -> Vector3<f64> + Copy {
    move |p: Vector3<f64>| {
        let gp = GroupPoint::new(model, p.x, p.y, p.z);
        FrameMatrix::at(&gp).cols.column(i).into_owned()
    }
}

/// Central-difference Jacobian of a coordinate field.
pub fn jacobian_fd(f: &dyn Field, p: Vector3<f64>, h: f64) -> Matrix3<f64> {
    let mut j = Matrix3::zeros();
    for k in 0..3 {
        let mut dp = Vector3::zeros();
        dp[k] = h;
        let col = (f.eval(p + dp) - f.eval(p - dp)) / (2.0 * h);
        j.set_column(k, &col);
    }
    j
}

/// Lie bracket [X, Y] = (DY)·X − (DX)·Y via central differences.
pub fn lie_bracket_fd(x: &dyn Field, y: &dyn Field, p: Vector3<f64>, h: f64) -> Vector3<f64> {
    let jx = jacobian_fd(x, p, h);
    let jy = jacobian_fd(y, p, h);
    jy * x.eval(p) - jx * y.eval(p)
}

/// Rank of span{fields, pairwise brackets} at p, the step-2 bracket test.
/// Singular values below `tol` times the largest are treated as zero.
pub fn hormander_rank(fields: &[&dyn Field], p: Vector3<f64>, tol: f64) -> usize {
    let n = fields.len();
    let mut cols: Vec<Vector3<f64>> = Vec::with_capacity(n + n * n);
    for f in fields {
        cols.push(f.eval(p));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            cols.push(lie_bracket_fd(fields[i], fields[j], p, 1e-5));
        }
    }
    let mat = nalgebra::DMatrix::from_fn(3, cols.len(), |r, c| cols[c][r]);
    let svd = mat.svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|s| **s > tol * smax).count()
}

/// Step-2 rank of the horizontal distribution of the standard structure.
pub fn horizontal_rank(p: &GroupPoint) -> usize {
    let x1 = frame_field(p.model, 0);
    let x2 = frame_field(p.model, 1);
    hormander_rank(&[&x1, &x2], Vector3::new(p.x, p.y, p.z), 1e-6)
}

// TESTS ###############################################################
