//! Coset representatives of the integer lattice modulo its image under an
//! integer dilation.
//!
//! For a dilation δ_s with integer s ≥ 2, the dilated lattice δ_s(K) sits
//! inside K with index s·s·s² = s⁴: the two horizontal coordinates scale by
//! s and the vertical one by s².  A canonical transversal is
//! {(ε₁, ε₂, ε₃) : ε₁, ε₂ ∈ [0, s), ε₃ ∈ [0, s²)}, and every lattice point
//! factors uniquely as representative ∘ δ_s(γ′).  The factorization is pure
//! integer arithmetic; the twist term of the group law shows up in the ε₃
//! residue.

use crate::error::{HeisError, Result};
use crate::group::LatticePoint;

/// The integer scale s = 1/t of a contraction parameter t, requiring 1/t to
/// be an integer ≥ 2 within floating-point tolerance.
pub fn scale_from_t(t: f64) -> Result<i64> {
    if !(t > 0.0) || t > 0.5 + 1e-12 {
        return Err(HeisError::NonIntegerScale(t));
    }
    let s = 1.0 / t;
    let rounded = s.round();
    if (s - rounded).abs() > 1e-9 * rounded {
        return Err(HeisError::NonIntegerScale(t));
    }
    Ok(rounded as i64)
}

/// The canonical transversal of K/δ_s(K), ordered ε₁-major then ε₂ then ε₃
/// so that index = (ε₁·s + ε₂)·s² + ε₃.
pub fn coset_representatives(t: f64) -> Result<Vec<LatticePoint>> {
    let s = scale_from_t(t)?;
    let mut reps = Vec::with_capacity((s * s * s * s) as usize);
    for e1 in 0..s {
        for e2 in 0..s {
            for e3 in 0..s * s {
                reps.push(LatticePoint::new(e1, e2, e3));
            }
        }
    }
    Ok(reps)
}

/// Index of a representative in the [`coset_representatives`] ordering.
pub fn rep_index(s: i64, rep: &LatticePoint) -> usize {
    debug_assert!(rep.m >= 0 && rep.m < s && rep.n >= 0 && rep.n < s);
    debug_assert!(rep.k >= 0 && rep.k < s * s);
    ((rep.m * s + rep.n) * s * s + rep.k) as usize
}

/// Factor γ = rep ∘ δ_s(γ′) with rep in the canonical transversal.
///
/// Writing the product out, m = ε₁ + s·m′ and n = ε₂ + s·n′ determine the
/// horizontal residues, and the twist contributes ε₁·s·n′ = ε₁·(n − ε₂) to
/// the vertical coordinate, so ε₃ = (k − ε₁·(n − ε₂)) mod s².
pub fn decompose(t: f64, gamma: &LatticePoint) -> Result<(LatticePoint, LatticePoint)> {
    let s = scale_from_t(t)?;
    let s2 = s * s;
    let e1 = gamma.m.rem_euclid(s);
    let e2 = gamma.n.rem_euclid(s);
    let m_prime = (gamma.m - e1) / s;
    let n_prime = (gamma.n - e2) / s;
    let twist = e1 * (gamma.n - e2);
    let e3 = (gamma.k - twist).rem_euclid(s2);
    let k_prime = (gamma.k - twist - e3) / s2;
    let rep = LatticePoint::new(e1, e2, e3);
    let inner = LatticePoint::new(m_prime, n_prime, k_prime);
    debug_assert_eq!(rep * inner.dilate_int(s), *gamma);
    Ok((rep, inner))
}

// TESTS ###############################################################
