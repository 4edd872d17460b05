//! Small dense optimizers used by the distance oracles and the fixed-point
//! search: limited-memory BFGS with Armijo backtracking, and Nelder-Mead
//! for the nonsmooth minimax objectives.  Both are deterministic.

/// Options for [`lbfgs`].
#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { max_iters: 200, memory: 8, grad_tol: 1e-10, step_tol: 1e-14 }
    }
}

/// Minimize f (value and gradient in one call) from x0.  Returns the best
/// point and value seen.
///
/// The line search enforces weak Wolfe conditions by bisection, so the
/// curvature pairs feeding the two-loop recursion stay well conditioned;
/// stale history is dropped whenever pairs keep failing anyway.
pub fn lbfgs<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut rejected_in_a_row = 0usize;

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();

    for _ in 0..opts.max_iters {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= opts.grad_tol * (1.0 + fx.abs()) {
            break;
        }

        let mut dir: Vec<f64>;
        if !s_hist.is_empty() {
            // two-loop recursion
            let mut q = g.clone();
            let k = s_hist.len();
            let mut alpha = vec![0.0; k];
            for i in (0..k).rev() {
                alpha[i] = rho_hist[i] * dot(&s_hist[i], &q);
                for j in 0..n {
                    q[j] -= alpha[i] * y_hist[i][j];
                }
            }
            let (s, y) = (&s_hist[k - 1], &y_hist[k - 1]);
            let gamma = dot(s, y) / dot(y, y).max(1e-300);
            for v in q.iter_mut() {
                *v *= gamma;
            }
            for i in 0..k {
                let beta = rho_hist[i] * dot(&y_hist[i], &q);
                for j in 0..n {
                    q[j] += (alpha[i] - beta) * s_hist[i][j];
                }
            }
            dir = q.iter().map(|v| -v).collect();
        } else {
            dir = g.iter().map(|v| -v).collect();
        }
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // weak Wolfe line search by expansion and bisection
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        let mut step = 1.0f64;
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        let mut f_new = fx;
        let mut found = false;
        for _ in 0..60 {
            for j in 0..n {
                x_new[j] = x[j] + step * dir[j];
            }
            f_new = f(&x_new, &mut g_new);
            if !f_new.is_finite() || f_new > fx + 1e-4 * step * slope {
                hi = step;
            } else if dot(&g_new, &dir) < 0.9 * slope {
                lo = step;
            } else {
                found = true;
                break;
            }
            step = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * step };
            if step <= 1e-20 || (hi - lo).abs() <= 1e-16 * hi.abs() {
                break;
            }
        }
        if !found && (!f_new.is_finite() || f_new > fx + 1e-4 * step * slope) {
            // no acceptable point along this ray; give up on the direction
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            continue;
        }

        let s: Vec<f64> = (0..n).map(|j| x_new[j] - x[j]).collect();
        let y: Vec<f64> = (0..n).map(|j| g_new[j] - g[j]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
            rejected_in_a_row = 0;
        } else {
            rejected_in_a_row += 1;
            if rejected_in_a_row >= 2 {
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                rejected_in_a_row = 0;
            }
        }
        let moved = step * dot(&dir, &dir).sqrt();
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
        if moved <= opts.step_tol * (1.0 + dot(&x, &x).sqrt()) {
            break;
        }
    }
    (x, fx)
}

/// Options for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    pub init_step: f64,
    /// Convergence: simplex diameter and value spread both below this.
    pub tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_iters: 2000, init_step: 0.1, tol: 1e-10 }
    }
}

/// Standard Nelder-Mead simplex minimization.  Deterministic; ties are
/// broken by index.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.init_step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();

    for _ in 0..opts.max_iters {
        // order ascending by value
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap().then(a.cmp(&b)));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| pts[i].clone()).collect();
        let ordered_vals: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
        pts = ordered;
        vals = ordered_vals;

        let diam: f64 = (1..=n)
            .map(|i| {
                (0..n)
                    .map(|j| (pts[i][j] - pts[0][j]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if diam <= opts.tol && (vals[n] - vals[0]).abs() <= opts.tol * (1.0 + vals[0].abs()) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = pts[n].clone();
        let reflect: Vec<f64> = (0..n).map(|j| 2.0 * centroid[j] - worst[j]).collect();
        let fr = f(&reflect);

        if fr < vals[0] {
            let expand: Vec<f64> = (0..n).map(|j| centroid[j] + 2.0 * (centroid[j] - worst[j])).collect();
            let fe = f(&expand);
            if fe < fr {
                pts[n] = expand;
                vals[n] = fe;
            } else {
                pts[n] = reflect;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = reflect;
            vals[n] = fr;
        } else {
            let contract: Vec<f64> = if fr < vals[n] {
                (0..n).map(|j| centroid[j] + 0.5 * (reflect[j] - centroid[j])).collect()
            } else {
                (0..n).map(|j| centroid[j] + 0.5 * (worst[j] - centroid[j])).collect()
            };
            let fc = f(&contract);
            if fc < vals[n].min(fr) {
                pts[n] = contract;
                vals[n] = fc;
            } else {
                // shrink toward the best point
                for i in 1..=n {
                    for j in 0..n {
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    }
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    (pts[best].clone(), vals[best])
}

// TESTS ###############################################################
