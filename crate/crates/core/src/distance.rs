//! Control-optimization distance oracles and the distance-comparison
//! sampler.
//!
//! Both metrics are handled by the same machinery: a curve is a list of
//! piecewise-constant frame controls integrated by exact exponential steps,
//! and the squared-speed energy is minimized under an endpoint constraint by
//! a penalty continuation (weight grows geometrically until the endpoint
//! tolerance is met) followed by a Gauss-Newton projection onto the
//! constraint.  The result is always the length of an explicitly feasible
//! path, so it is an upper bound on the true distance no matter how the
//! optimizer behaved.  Nothing here shares code or initial guesses with the
//! geodesic shooting solvers; the two routes cross-validate each other.
//!
//! The gradient of endpoint and energy with respect to the controls is
//! computed analytically by a backward sweep through the chain of group
//! multiplications, so each objective evaluation is O(segments).

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::geodesic::cc_distance_shoot;
use crate::group::{GroupPoint, Model};
use crate::optimize::{lbfgs, LbfgsOptions};
use crate::path::ControlPath;
use crate::voxel::Bounds3;

/// Endpoint feasibility required of a reported distance, in group
/// coordinates relative to 1 + |target|.
pub const ENDPOINT_TOL: f64 = 1e-6;

/// The Gauss-Newton polish aims well below the acceptance tolerance.
const PROJECT_TOL: f64 = 1e-11;

// control-problem plumbing ############################################

/// Discretized endpoint map for `n` segments of duration 1/n each.
/// `dim` = 2 restricts to horizontal controls, 3 allows the full frame.
/// The target is stored in polarized coordinates.
struct ControlProblem {
    n: usize,
    dim: usize,
    tau: f64,
    target: Vector3<f64>,
}

impl ControlProblem {
    fn new(target_polarized: Vector3<f64>, n: usize, dim: usize) -> Self {
        assert!(n >= 4, "need at least 4 segments");
        assert!(dim == 2 || dim == 3);
        ControlProblem { n, dim, tau: 1.0 / n as f64, target: target_polarized }
    }

    fn u3(&self, u: &[f64], i: usize) -> f64 {
        if self.dim == 3 { u[i * 3 + 2] } else { 0.0 }
    }

    /// One exponential step in polarized coordinates.
    fn step(&self, u: &[f64], i: usize) -> Vector3<f64> {
        let (a, b) = (u[i * self.dim], u[i * self.dim + 1]);
        let c = self.u3(u, i);
        let t = self.tau;
        Vector3::new(t * a, t * b, t * c + 0.5 * t * t * a * b)
    }

    /// Forward sweep; `pts[i]` is the point after i steps, `pts[0] = 0`.
    fn forward(&self, u: &[f64], pts: &mut Vec<Vector3<f64>>) {
        pts.clear();
        pts.push(Vector3::zeros());
        for i in 0..self.n {
            let p = pts[i];
            let e = self.step(u, i);
            pts.push(Vector3::new(p.x + e.x, p.y + e.y, p.z + e.z + p.x * e.y));
        }
    }

    /// Backward sweep: given the adjoint of a scalar with respect to the
    /// final point, accumulate its gradient with respect to the controls.
    fn backward(&self, u: &[f64], pts: &[Vector3<f64>], mut lam: Vector3<f64>, grad: &mut [f64]) {
        let t = self.tau;
        for i in (0..self.n).rev() {
            let p = pts[i];
            let e = self.step(u, i);
            // pull back through the multiplication m(p, e)
            let w = Vector3::new(lam.x, lam.y + p.x * lam.z, lam.z);
            // and through the exponential e(u_i)
            let (a, b) = (u[i * self.dim], u[i * self.dim + 1]);
            grad[i * self.dim] += t * w.x + 0.5 * t * t * b * w.z;
            grad[i * self.dim + 1] += t * w.y + 0.5 * t * t * a * w.z;
            if self.dim == 3 {
                grad[i * 3 + 2] += t * w.z;
            }
            lam = Vector3::new(lam.x + e.y * lam.z, lam.y, lam.z);
        }
    }

    /// Penalty objective Σ τ|u|² + μ|endpoint − target|² with gradient.
    fn penalty(&self, u: &[f64], mu: f64, grad: &mut [f64], pts: &mut Vec<Vector3<f64>>) -> f64 {
        self.forward(u, pts);
        let gap = pts[self.n] - self.target;
        let mut energy = 0.0;
        for (g, &v) in grad.iter_mut().zip(u) {
            *g = 2.0 * self.tau * v;
            energy += self.tau * v * v;
        }
        self.backward(u, pts, 2.0 * mu * gap, grad);
        energy + mu * gap.norm_squared()
    }

    fn endpoint(&self, u: &[f64], pts: &mut Vec<Vector3<f64>>) -> Vector3<f64> {
        self.forward(u, pts);
        pts[self.n]
    }

    /// Length Σ τ|u_i| of the discrete path.
    fn length(&self, u: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let a = u[i * self.dim];
                let b = u[i * self.dim + 1];
                let c = self.u3(u, i);
                self.tau * (a * a + b * b + c * c).sqrt()
            })
            .sum()
    }

    /// Newton steps toward an exactly feasible endpoint, moving the controls
    /// as little as possible (minimum-norm correction through J·Jᵀ).
    fn project(&self, u: &mut [f64], pts: &mut Vec<Vector3<f64>>) -> f64 {
        let m = u.len();
        let mut rows = vec![vec![0.0; m]; 3];
        let mut best_gap = f64::INFINITY;
        for _ in 0..16 {
            let end = self.endpoint(u, pts);
            let gap = self.target - end;
            let g = gap.norm();
            if g < best_gap {
                best_gap = g;
            }
            if g <= PROJECT_TOL * (1.0 + self.target.norm()) {
                break;
            }
            for (k, row) in rows.iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v = 0.0);
                let mut basis = Vector3::zeros();
                basis[k] = 1.0;
                self.backward(u, pts, basis, row);
            }
            let mut jjt = Matrix3::zeros();
            for r in 0..3 {
                for c in 0..3 {
                    jjt[(r, c)] = rows[r].iter().zip(&rows[c]).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            // tiny Tikhonov term keeps the solve stable near rank drops
            for d in 0..3 {
                jjt[(d, d)] += 1e-14 * (1.0 + jjt.trace().abs());
            }
            let y = match jjt.lu().solve(&gap) {
                Some(y) => y,
                None => break,
            };
            for j in 0..m {
                u[j] += rows[0][j] * y.x + rows[1][j] * y.y + rows[2][j] * y.z;
            }
        }
        self.endpoint(u, pts);
        (pts[self.n] - self.target).norm()
    }
}

// initial guesses #####################################################

/// Piecewise arc with total heading change `alpha` whose chord points along
/// the target's planar displacement.  Pure geometry, no solver input.
fn arc_controls(problem: &ControlProblem, alpha: f64, vertical_rate: f64) -> Vec<f64> {
    let n = problem.n;
    let dim = problem.dim;
    let (a, b) = (problem.target.x, problem.target.y);
    let rho = (a * a + b * b).sqrt();
    let mut u = vec![0.0; n * dim];
    if alpha.abs() < 1e-12 {
        for i in 0..n {
            u[i * dim] = a;
            u[i * dim + 1] = b;
            if dim == 3 {
                u[i * dim + 2] = vertical_rate;
            }
        }
        return u;
    }
    let chord_angle = if rho > 1e-12 { b.atan2(a) } else { 0.0 };
    let half = 0.5 * alpha;
    let speed = if rho > 1e-12 {
        // chord of a unit-time arc with curvature alpha
        rho * half / half.sin().abs().max(1e-9)
    } else {
        // closed loop sized so the swept area matches the vertical target
        let c_sym = problem.target.z - 0.5 * a * b;
        2.0 * (std::f64::consts::PI * c_sym.abs()).sqrt()
    };
    for i in 0..n {
        let theta = chord_angle - half + alpha * (i as f64 + 0.5) / n as f64;
        u[i * dim] = speed * theta.cos();
        u[i * dim + 1] = speed * theta.sin();
        if dim == 3 {
            u[i * dim + 2] = vertical_rate;
        }
    }
    u
}

fn initial_guesses(problem: &ControlProblem) -> Vec<(&'static str, Vec<f64>)> {
    use std::f64::consts::PI;
    let (a, b) = (problem.target.x, problem.target.y);
    let c_sym = problem.target.z - 0.5 * a * b;
    let rho = (a * a + b * b).sqrt();
    let loop_sign = if c_sym >= 0.0 { 1.0 } else { -1.0 };

    let mut seeds: Vec<(&'static str, Vec<f64>)> = Vec::new();
    if rho > 1e-9 {
        seeds.push(("straight", arc_controls(problem, 0.0, 0.0)));
    }
    for alpha in [0.8 * PI, -0.8 * PI, 1.6 * PI, -1.6 * PI] {
        seeds.push(("arc", arc_controls(problem, alpha, 0.0)));
    }
    if c_sym.abs() > 1e-12 {
        seeds.push(("loop", arc_controls(problem, loop_sign * 2.0 * PI, 0.0)));
        if c_sym.abs() > PI * rho * rho {
            seeds.push(("wide-loop", arc_controls(problem, loop_sign * 2.4 * PI, 0.0)));
        }
    }
    if problem.dim == 3 {
        // the one-parameter subgroup through the target: exactly feasible
        let mut u = vec![0.0; problem.n * 3];
        for i in 0..problem.n {
            u[i * 3] = a;
            u[i * 3 + 1] = b;
            u[i * 3 + 2] = c_sym;
        }
        seeds.push(("log", u));
    }
    seeds
}

// public oracle entry points ##########################################

/// A feasible control path with its exact length and endpoint defect.
#[derive(Debug, Clone)]
pub struct ControlSolve {
    pub length: f64,
    pub endpoint_error: f64,
    /// Which initial guess produced the winner; diagnostic only.
    pub init_label: &'static str,
    pub path: ControlPath,
}

fn solve(p: &GroupPoint, q: &GroupPoint, segments: usize, dim: usize) -> Result<ControlSolve> {
    let delta = p.left_delta(q).to_model(Model::Polarized);
    let target = Vector3::new(delta.x, delta.y, delta.z);
    let scale = 1.0 + target.norm();
    if p == q || target.norm() == 0.0 {
        let path = ControlPath::horizontal(*p, &[]);
        return Ok(ControlSolve { length: 0.0, endpoint_error: 0.0, init_label: "trivial", path });
    }

    let problem = ControlProblem::new(target, segments, dim);
    let mut best: Option<(f64, f64, &'static str, Vec<f64>)> = None;
    let mut worst_gap: f64 = f64::INFINITY;
    let mut pts = Vec::with_capacity(segments + 1);

    for (label, mut u) in initial_guesses(&problem) {
        // penalty continuation: grow the weight tenfold until the endpoint
        // tolerance is met
        let mut mu = 1e2;
        let opts = LbfgsOptions { max_iters: 160, memory: 10, grad_tol: 1e-11, step_tol: 1e-15 };
        for _ in 0..11 {
            let mut scratch = Vec::with_capacity(segments + 1);
            let (u_new, _) = lbfgs(
                |x, g| problem.penalty(x, mu, g, &mut scratch),
                &u,
                &opts,
            );
            u = u_new;
            if (problem.endpoint(&u, &mut pts) - target).norm() <= ENDPOINT_TOL * scale {
                break;
            }
            mu *= 10.0;
        }
        let gap = problem.project(&mut u, &mut pts);
        worst_gap = worst_gap.min(gap);
        if gap > ENDPOINT_TOL * scale {
            continue;
        }
        let len = problem.length(&u);
        if best.as_ref().map_or(true, |(l, _, _, _)| len < *l) {
            best = Some((len, gap, label, u));
        }
    }

    let (length, endpoint_error, init_label, u) = best.ok_or(HeisError::InfeasibleEndpoint {
        residual: worst_gap,
        restarts: initial_guesses(&problem).len(),
    })?;

    let tau = 1.0 / segments as f64;
    let path = if dim == 2 {
        let segs: Vec<([f64; 2], f64)> =
            (0..segments).map(|i| ([u[i * 2], u[i * 2 + 1]], tau)).collect();
        ControlPath::horizontal(*p, &segs)
    } else {
        let segs: Vec<([f64; 3], f64)> =
            (0..segments).map(|i| ([u[i * 3], u[i * 3 + 1], u[i * 3 + 2]], tau)).collect();
        ControlPath::frame(*p, &segs)
    };
    Ok(ControlSolve { length, endpoint_error, init_label, path })
}

/// Upper bound on the Carnot-Caratheodory distance by direct optimization
/// over horizontal piecewise-constant controls.  Independent of the
/// geodesic shooting solver.
pub fn cc_distance_upper(p: &GroupPoint, q: &GroupPoint, segments: usize) -> Result<f64> {
    cc_control_solve(p, q, segments).map(|s| s.length)
}

/// Like [`cc_distance_upper`] but returning the optimizing path.
pub fn cc_control_solve(p: &GroupPoint, q: &GroupPoint, segments: usize) -> Result<ControlSolve> {
    solve(p, q, segments, 2)
}

/// Riemannian-contraction distance by optimization over full-frame
/// controls.  The initial guesses include the one-parameter subgroup
/// through the target, which is exactly feasible, so a finite value is
/// always available.
pub fn contraction_distance(p: &GroupPoint, q: &GroupPoint) -> Result<f64> {
    contraction_control_solve(p, q, 64).map(|s| s.length)
}

/// Like [`contraction_distance`] but returning the optimizing path and
/// letting the caller pick the segment count.
pub fn contraction_control_solve(
    p: &GroupPoint,
    q: &GroupPoint,
    segments: usize,
) -> Result<ControlSolve> {
    solve(p, q, segments, 3)
}

// distance-comparison sampling ########################################

/// Empirical comparison of the two distances over random pairs in a box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceEstimateReport {
    /// max d / sqrt(d_R) over the sample: the fitted comparison constant.
    pub c_fit: f64,
    /// Pairs with d > c_fit·sqrt(d_R); zero by construction of c_fit.
    pub violations: usize,
    /// Pairs where the sub-Riemannian distance came out below the
    /// Riemannian one beyond tolerance; the ordering forbids this.
    pub order_violations: usize,
    pub samples: usize,
    pub skipped: usize,
    pub box_bounds: Bounds3,
    pub seed: u64,
    /// Quantiles of the ratio d / sqrt(d_R): min, median, p90, max.
    pub ratio_quantiles: [f64; 4],
    pub mean_ratio: f64,
    pub max_d: f64,
    pub min_d_r: f64,
}

/// One sampled pair with both distances, in polarized coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairSample {
    pub p: [f64; 3],
    pub q: [f64; 3],
    pub d_cc: f64,
    pub d_contraction: f64,
}

/// Evaluate both distances on `samples` random pairs from `bounds`
/// (polarized coordinates).  Pair i is drawn from a stream seeded by
/// (seed, i), so results do not depend on thread count; an entry is None
/// when the pair is degenerate or the contraction solver fails on it.
pub fn sample_distance_pairs(bounds: Bounds3, samples: usize, seed: u64) -> Vec<Option<PairSample>> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let a = bounds.sample_uniform(&mut rng);
            let b = bounds.sample_uniform(&mut rng);
            let p = GroupPoint::polarized(a.x, a.y, a.z);
            let q = GroupPoint::polarized(b.x, b.y, b.z);
            if p.left_delta(&q).coord_norm() == 0.0 {
                return None;
            }
            let d = cc_distance_shoot(&p, &q);
            let d_r = contraction_distance(&p, &q).ok()?;
            Some(PairSample {
                p: [a.x, a.y, a.z],
                q: [b.x, b.y, b.z],
                d_cc: d,
                d_contraction: d_r,
            })
        })
        .collect()
}

/// Fold sampled pairs (see [`sample_distance_pairs`]) into the comparison
/// report.
pub fn estimate_from_pairs(
    bounds: Bounds3,
    seed: u64,
    pairs: &[Option<PairSample>],
) -> Result<DistanceEstimateReport> {
    if pairs.len() < 100 {
        return Err(HeisError::InvalidParameter(format!(
            "need at least 100 samples for a stable estimate, got {}",
            pairs.len()
        )));
    }
    let mut ratios = Vec::with_capacity(pairs.len());
    let mut skipped = 0usize;
    let mut order_violations = 0usize;
    let mut max_d: f64 = 0.0;
    let mut min_d_r = f64::INFINITY;
    for entry in pairs {
        match entry {
            None => skipped += 1,
            Some(s) => {
                let (d, d_r) = (s.d_cc, s.d_contraction);
                if d_r > d * (1.0 + 1e-9) + 1e-12 {
                    order_violations += 1;
                }
                max_d = max_d.max(d);
                min_d_r = min_d_r.min(d_r);
                ratios.push(d / d_r.sqrt());
            }
        }
    }
    if ratios.is_empty() {
        return Err(HeisError::EmptySet("all sampled pairs degenerate".into()));
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c_fit = *ratios.last().unwrap();
    let violations = ratios.iter().filter(|&&r| r > c_fit).count();
    let quantile = |q: f64| ratios[((ratios.len() - 1) as f64 * q).round() as usize];
    Ok(DistanceEstimateReport {
        c_fit,
        violations,
        order_violations,
        samples: ratios.len(),
        skipped,
        box_bounds: bounds,
        seed,
        ratio_quantiles: [ratios[0], quantile(0.5), quantile(0.9), c_fit],
        mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
        max_d,
        min_d_r,
    })
}

/// Sample `samples` point pairs uniformly from `bounds` (polarized
/// coordinates) and compare d with d_R.  Pair i is drawn from a stream
/// seeded by (seed, i), so results do not depend on thread count.
pub fn estimate_constant(bounds: Bounds3, samples: usize, seed: u64) -> Result<DistanceEstimateReport> {
    if samples < 100 {
        return Err(HeisError::InvalidParameter(format!(
            "need at least 100 samples for a stable estimate, got {samples}"
        )));
    }
    estimate_from_pairs(bounds, seed, &sample_distance_pairs(bounds, samples, seed))
}

/// Uniform random point of a box, in polarized coordinates.  Shared by the
/// test harnesses that sample pairs outside of [`estimate_constant`].
pub fn sample_point<R: Rng>(bounds: &Bounds3, rng: &mut R) -> GroupPoint {
    let v = bounds.sample_uniform(rng);
    GroupPoint::polarized(v.x, v.y, v.z)
}

// TESTS ###############################################################
