//! Limited-memory quasi-Newton ascent for smooth concave objectives.
//!
//! The caller supplies one callback that returns the objective value and
//! fills the gradient; the optimizer maximizes it with two-loop L-BFGS
//! directions, a weak-Wolfe bracketing line search (sufficient increase plus
//! a curvature condition, so curvature pairs stay well-posed even off the
//! concave regime), and a steepest-ascent fallback whenever the quasi-Newton
//! direction is not an ascent direction. Runs stop early once accepted
//! improvements sit at the rounding resolution of the objective while the
//! gradient norm has stopped shrinking — past that point every line search
//! just chases floating-point noise.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::math::dot;

/// Tuning knobs; the defaults suit well-scaled problems with at most a few
/// thousand variables.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Convergence threshold on the Euclidean norm of the gradient.
    pub grad_tol: f64,
    /// Armijo sufficient-increase coefficient.
    pub armijo_c: f64,
    /// Multiplicative step shrink factor in the line search.
    pub backtrack: f64,
    /// Number of curvature pairs retained.
    pub history: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            armijo_c: 1e-4,
            backtrack: 0.5,
            history: 10,
        }
    }
}

/// How the run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerStatus {
    /// Gradient norm fell below the threshold.
    Converged,
    /// Iteration budget exhausted before convergence.
    IterLimit,
    /// Progress fell to floating-point resolution before the gradient
    /// tolerance was met — either the line search could not improve the
    /// objective at the smallest representable step, or consecutive accepted
    /// steps gained only rounding noise while the gradient stopped
    /// shrinking. The iterate is at numerical precision.
    Stalled,
}

/// Final iterate plus diagnostics.
#[derive(Debug, Clone)]
pub struct OptimizerResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: OptimizerStatus,
    /// Objective value at the start and after each accepted step.
    pub trace: Vec<f64>,
}

const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e12;
const CURVATURE_GUARD: f64 = 1e-12;
/// Weak-Wolfe curvature coefficient (standard for quasi-Newton methods).
const WOLFE_C2: f64 = 0.9;
const MAX_LINE_SEARCH_TRIALS: usize = 64;

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Two-loop recursion: returns the descent direction -H g for the
/// minimization view, given the gradient `g` of the function being
/// minimized.
fn lbfgs_direction(
    g: &[f64],
    s_hist: &VecDeque<Vec<f64>>,
    y_hist: &VecDeque<Vec<f64>>,
    rho_hist: &VecDeque<f64>,
) -> Vec<f64> {
    let mut q = g.to_vec();
    let m = s_hist.len();
    let mut alphas = vec![0.0; m];
    for i in (0..m).rev() {
        alphas[i] = rho_hist[i] * dot(&s_hist[i], &q);
        axpy(-alphas[i], &y_hist[i], &mut q);
    }
    if let Some(last) = m.checked_sub(1) {
        let gamma = dot(&s_hist[last], &y_hist[last]) / dot(&y_hist[last], &y_hist[last]);
        for v in &mut q {
            *v *= gamma;
        }
    }
    for i in 0..m {
        let beta = rho_hist[i] * dot(&y_hist[i], &q);
        axpy(alphas[i] - beta, &s_hist[i], &mut q);
    }
    for v in &mut q {
        *v = -*v;
    }
    q
}

/// Maximizes `eval`, which must return the objective value and write the
/// gradient of the objective (ascent direction) into its second argument.
pub fn maximize<F>(mut eval: F, x0: &[f64], cfg: &OptimizerConfig) -> Result<OptimizerResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut value = eval(&x, &mut grad);
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective {
            delta_norm: norm(&x),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged(
            "non-finite gradient at the initial point".into(),
        ));
    }

    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut rho_hist: VecDeque<f64> = VecDeque::new();
    let mut trace = vec![value];
    let mut status = OptimizerStatus::IterLimit;
    let mut iterations = 0;
    let mut noise_steps = 0usize;

    for iter in 0..cfg.max_iters {
        iterations = iter;
        let gnorm = norm(&grad);
        if gnorm <= cfg.grad_tol {
            status = OptimizerStatus::Converged;
            break;
        }

        // Minimization view of the problem: g_min = -grad.
        let g_min: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut dir = lbfgs_direction(&g_min, &s_hist, &y_hist, &rho_hist);
        let mut slope = dot(&dir, &g_min);
        if !(slope < -f64::MIN_POSITIVE * norm(&dir).max(1.0)) || !slope.is_finite() {
            // Not a descent direction for the minimization view; fall back.
            dir = g_min.iter().map(|g| -g).collect();
            slope = dot(&dir, &g_min);
            if slope >= 0.0 {
                // Gradient is numerically zero.
                status = OptimizerStatus::Converged;
                break;
            }
        }

        // Weak-Wolfe bracketing: shrink on a sufficient-increase failure,
        // grow on a curvature failure, and fall back to the best
        // sufficient-increase point if full Wolfe is numerically
        // unattainable.
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        let mut alpha = 1.0;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        let mut fallback: Option<(Vec<f64>, f64, Vec<f64>)> = None;
        let mut grad_trial = vec![0.0; n];
        let mut last_finite: Option<f64> = None;
        for _ in 0..MAX_LINE_SEARCH_TRIALS {
            let x_trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            let v_trial = eval(&x_trial, &mut grad_trial);
            let finite = v_trial.is_finite() && grad_trial.iter().all(|g| g.is_finite());
            // Sufficient increase, on the minimization view:
            // -v_trial <= -value + c a slope.
            if finite && -v_trial <= -value + cfg.armijo_c * alpha * slope {
                let slope_trial = -dot(&dir, &grad_trial);
                if slope_trial >= WOLFE_C2 * slope || alpha >= MAX_STEP {
                    accepted = Some((x_trial, v_trial));
                    break;
                }
                // Increase is sufficient but the step is still short of the
                // curvature condition: remember it and search further out.
                fallback = Some((x_trial, v_trial, grad_trial.clone()));
                lo = alpha;
            } else {
                if finite {
                    last_finite = Some(v_trial);
                }
                hi = alpha;
            }
            alpha = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * alpha
            };
            if alpha < MIN_STEP || (hi.is_finite() && hi - lo <= f64::EPSILON * hi) {
                break;
            }
        }
        if accepted.is_none() {
            if let Some((x_fb, v_fb, g_fb)) = fallback {
                grad_trial = g_fb;
                accepted = Some((x_fb, v_fb));
            }
        }

        let Some((x_new, v_new)) = accepted else {
            match last_finite {
                Some(v) if v < value - 1e-6 * (1.0 + value.abs()) => {
                    return Err(Error::Diverged(format!(
                        "objective fell from {value} to {v} at step size {MIN_STEP}; \
                         gradient and objective are inconsistent"
                    )));
                }
                Some(_) => {
                    status = OptimizerStatus::Stalled;
                    break;
                }
                None => {
                    return Err(Error::Diverged(
                        "objective is non-finite in every line-search trial".into(),
                    ));
                }
            }
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad
            .iter()
            .zip(&grad_trial)
            .map(|(old, new)| old - new) // minimization view: (-new) - (-old)
            .collect();
        let sy = dot(&s, &y);
        if sy > CURVATURE_GUARD * norm(&s) * norm(&y) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if s_hist.len() > cfg.history {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        let improvement = v_new - value;
        x = x_new;
        value = v_new;
        std::mem::swap(&mut grad, &mut grad_trial);
        trace.push(value);
        iterations = iter + 1;

        // A step that gains only rounding noise while leaving the gradient
        // norm essentially unchanged is stall evidence; genuine asymptotic
        // convergence shrinks the gradient sharply even when the objective
        // gain is small. Two such steps in a row mean the iterate is pinned
        // at the objective's floating-point resolution.
        if improvement <= 1e-12 * value.abs().max(1.0) && norm(&grad) >= 0.9 * gnorm {
            noise_steps += 1;
            if noise_steps >= 2 {
                status = OptimizerStatus::Stalled;
                break;
            }
        } else {
            noise_steps = 0;
        }
    }

    if status == OptimizerStatus::IterLimit && norm(&grad) <= cfg.grad_tol {
        status = OptimizerStatus::Converged;
    }
    Ok(OptimizerResult {
        grad_norm: norm(&grad),
        x,
        value,
        iterations,
        status,
        trace,
    })
}
