//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Memory 10, c1 = 1e-4, c2 = 0.9 and convergence on the gradient max-norm
//! by default. The accepted-iterate cost trace is monotone non-increasing.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// stop when the gradient max-norm drops below this
    pub grad_tol: f64,
    /// optional early stop on the objective value
    pub f_target: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 1000,
            grad_tol: 1e-6,
            f_target: None,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm_inf: f64,
    pub iterations: usize,
    /// (iteration, objective) at every accepted iterate, starting from 0
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
    /// false when the objective or gradient turned non-finite
    pub finite: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimize with a combined value-and-gradient closure.
pub fn minimize_with_gradient<F>(mut fg: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = fg(&x);
    let mut trace = vec![(0usize, f)];
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return LbfgsOutcome {
            grad_norm_inf: norm_inf(&g),
            x,
            f,
            iterations: 0,
            trace,
            converged: false,
            finite: false,
        };
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;

    for iter in 0..opts.max_iters {
        let gnorm = norm_inf(&g);
        if gnorm <= opts.grad_tol {
            return LbfgsOutcome {
                x,
                f,
                grad_norm_inf: gnorm,
                iterations,
                trace,
                converged: true,
                finite: true,
            };
        }
        if let Some(target) = opts.f_target {
            if f <= target {
                return LbfgsOutcome {
                    x,
                    f,
                    grad_norm_inf: gnorm,
                    iterations,
                    trace,
                    converged: true,
                    finite: true,
                };
            }
        }

        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let scale = dot(s, y) / dot(y, y).max(1e-300);
            for di in d.iter_mut() {
                *di *= scale;
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }

        let mut dphi0 = dot(&g, &d);
        if dphi0 >= 0.0 {
            // not a descent direction; fall back to steepest descent
            d = g.iter().map(|v| -v).collect();
            dphi0 = -dot(&g, &g);
            history.clear();
        }

        let alpha_init = if history.is_empty() { (1.0 / gnorm.max(1.0)).min(1.0) } else { 1.0 };
        let ls = strong_wolfe(&mut fg, &x, f, &g, &d, dphi0, alpha_init, opts);
        let (alpha, f_new, g_new) = match ls {
            Some(v) => v,
            None => {
                // no acceptable decrease; terminate at the current iterate
                return LbfgsOutcome {
                    x,
                    f,
                    grad_norm_inf: gnorm,
                    iterations,
                    trace,
                    converged: false,
                    finite: true,
                };
            }
        };
        if !f_new.is_finite() || g_new.iter().any(|v| !v.is_finite()) {
            return LbfgsOutcome {
                x,
                f,
                grad_norm_inf: gnorm,
                iterations,
                trace,
                converged: false,
                finite: false,
            };
        }

        let mut s = vec![0.0; n];
        for i in 0..n {
            s[i] = alpha * d[i];
        }
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm_inf(&s).max(1e-300) * norm_inf(&y).max(1e-300) && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s.clone(), y, 1.0 / sy));
        }
        for i in 0..n {
            x[i] += s[i];
        }
        f = f_new;
        g = g_new;
        iterations = iter + 1;
        trace.push((iterations, f));
    }

    let gnorm = norm_inf(&g);
    LbfgsOutcome {
        x,
        f,
        grad_norm_inf: gnorm,
        iterations,
        trace,
        converged: gnorm <= opts.grad_tol,
        finite: true,
    }
}

/// Strong-Wolfe line search (bracket then zoom). Returns (alpha, f, g) at an
/// accepted step, or the best sufficient-decrease point found, or None.
#[allow(clippy::too_many_arguments)]
fn strong_wolfe<F>(
    fg: &mut F,
    x: &[f64],
    phi0: f64,
    _g0: &[f64],
    d: &[f64],
    dphi0: f64,
    alpha_init: f64,
    opts: &LbfgsOptions,
) -> Option<(f64, f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let eval = |fg: &mut F, alpha: f64| {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let (f, g) = fg(&xt);
        let dphi = dot(&g, d);
        (f, g, dphi)
    };

    let alpha_max = 1e4;
    let mut alpha_prev = 0.0;
    let mut phi_prev = phi0;
    let mut alpha = alpha_init;
    // best sufficient-decrease fallback
    let mut fallback: Option<(f64, f64, Vec<f64>)> = None;

    for i in 0..opts.max_line_search {
        let (phi, g, dphi) = eval(fg, alpha);
        if !phi.is_finite() {
            // retreat
            alpha = 0.5 * (alpha_prev + alpha);
            continue;
        }
        if phi <= phi0 + opts.c1 * alpha * dphi0 && fallback.as_ref().map_or(true, |f| phi < f.1) {
            fallback = Some((alpha, phi, g.clone()));
        }
        if phi > phi0 + opts.c1 * alpha * dphi0 || (i > 0 && phi >= phi_prev) {
            return zoom(fg, x, d, phi0, dphi0, alpha_prev, phi_prev, alpha, phi, opts)
                .or(fallback);
        }
        if dphi.abs() <= -opts.c2 * dphi0 {
            return Some((alpha, phi, g));
        }
        if dphi >= 0.0 {
            return zoom(fg, x, d, phi0, dphi0, alpha, phi, alpha_prev, phi_prev, opts)
                .or(fallback);
        }
        alpha_prev = alpha;
        phi_prev = phi;
        alpha = (2.0 * alpha).min(alpha_max);
        if alpha >= alpha_max {
            break;
        }
    }
    fallback
}

#[allow(clippy::too_many_arguments)]
fn zoom<F>(
    fg: &mut F,
    x: &[f64],
    d: &[f64],
    phi0: f64,
    dphi0: f64,
    mut alpha_lo: f64,
    mut phi_lo: f64,
    mut alpha_hi: f64,
    mut phi_hi: f64,
    opts: &LbfgsOptions,
) -> Option<(f64, f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let eval = |fg: &mut F, alpha: f64| {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let (f, g) = fg(&xt);
        let dphi = dot(&g, d);
        (f, g, dphi)
    };
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for _ in 0..opts.max_line_search {
        let alpha = 0.5 * (alpha_lo + alpha_hi);
        if (alpha_hi - alpha_lo).abs() < 1e-16 * alpha_lo.abs().max(1.0) {
            break;
        }
        let (phi, g, dphi) = eval(fg, alpha);
        if phi.is_finite() && phi <= phi0 + opts.c1 * alpha * dphi0 {
            if best.as_ref().map_or(true, |b| phi < b.1) {
                best = Some((alpha, phi, g.clone()));
            }
        }
        if !phi.is_finite() || phi > phi0 + opts.c1 * alpha * dphi0 || phi >= phi_lo {
            alpha_hi = alpha;
            phi_hi = phi;
        } else {
            if dphi.abs() <= -opts.c2 * dphi0 {
                return Some((alpha, phi, g));
            }
            if dphi * (alpha_hi - alpha_lo) >= 0.0 {
                alpha_hi = alpha_lo;
                phi_hi = phi_lo;
            }
            alpha_lo = alpha;
            phi_lo = phi;
        }
        let _ = phi_hi;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn minimizes_a_convex_quadratic_exactly() {
        // f(x) = sum (x_i - t_i)^2 with anisotropic scales
        let targets = [1.0, -2.0, 0.5, 3.0];
        let scales = [1.0, 10.0, 0.1, 4.0];
        let outcome = minimize_with_gradient(
            |x| {
                let mut f = 0.0;
                let mut g = vec![0.0; 4];
                for i in 0..4 {
                    let d = x[i] - targets[i];
                    f += scales[i] * d * d;
                    g[i] = 2.0 * scales[i] * d;
                }
                (f, g)
            },
            vec![0.0; 4],
            &LbfgsOptions { grad_tol: 1e-10, ..Default::default() },
        );
        assert!(outcome.converged);
        for (xi, ti) in outcome.x.iter().zip(&targets) {
            assert_abs_diff_eq!(xi, ti, epsilon = 1e-8);
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let outcome = minimize_with_gradient(
            |x| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                let g = vec![
                    -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                    200.0 * (b - a * a),
                ];
                (f, g)
            },
            vec![-1.2, 1.0],
            &LbfgsOptions { max_iters: 500, grad_tol: 1e-9, ..Default::default() },
        );
        assert!(outcome.converged, "grad norm {}", outcome.grad_norm_inf);
        assert_abs_diff_eq!(outcome.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(outcome.x[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn accepted_trace_is_monotone_non_increasing() {
        let outcome = minimize_with_gradient(
            |x| {
                let f = x.iter().map(|v| v.cos()).sum::<f64>() + 0.01 * dot(x, x);
                let g = x.iter().map(|v| -v.sin() + 0.02 * v).collect();
                (f, g)
            },
            vec![0.3, 1.1, -2.0, 0.7, 0.0],
            &LbfgsOptions::default(),
        );
        for pair in outcome.trace.windows(2) {
            assert!(pair[1].1 <= pair[0].1 + 1e-12, "trace not monotone: {pair:?}");
        }
    }

    #[test]
    fn nonfinite_objective_is_flagged() {
        let outcome = minimize_with_gradient(
            |_| (f64::NAN, vec![0.0]),
            vec![1.0],
            &LbfgsOptions::default(),
        );
        assert!(!outcome.finite);
    }
}
