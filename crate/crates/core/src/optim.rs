//! Quasi-Newton minimization with inverse-Hessian updates and a backtracking
//! line search.
//!
//! The objective callback returns the function value together with an
//! optional gradient. A missing gradient marks a penalized point (outside the
//! feasible region of the model being fitted): the line search may probe such
//! points and will reject them on value, but the algorithm stops if it ever
//! lands on one.

use nalgebra::{DMatrix, DVector};

pub(crate) struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient max-norm drops below this.
    pub grad_tol: f64,
    /// Stop when an accepted step changes the value by less than this,
    /// relative to the value's magnitude.
    pub rel_f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 500,
            grad_tol: 1e-6,
            rel_f_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Minimizes `objective` starting from `x0`.
///
/// Returns `None` when the start itself is penalized (no gradient there);
/// otherwise always returns the best point seen, flagged with whether a
/// stationarity criterion was met.
pub(crate) fn minimize<F>(objective: &mut F, x0: &[f64], opts: &BfgsOptions) -> Option<BfgsOutcome>
where
    F: FnMut(&[f64]) -> (f64, Option<Vec<f64>>),
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut f, grad) = objective(x.as_slice());
    let mut g = DVector::from_column_slice(&grad?);
    if !f.is_finite() {
        return None;
    }
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut scaled_once = false;
    let mut converged = false;

    for _ in 1..=opts.max_iter {
        if g.amax() < opts.grad_tol {
            converged = true;
            break;
        }
        let mut dir = -(&h * &g);
        if dir.dot(&g) >= 0.0 {
            // The approximation lost descent quality; restart from steepest
            // descent.
            h = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        let mut step = 1.0f64;
        let mut accepted: Option<(DVector<f64>, f64, Vec<f64>)> = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &dir * step;
            let (ft, gt) = objective(trial.as_slice());
            if ft.is_finite() && ft <= f + ARMIJO_C1 * step * slope {
                if let Some(gt) = gt {
                    accepted = Some((trial, ft, gt));
                }
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // No acceptable step in this direction; treat the current point
            // as the end of the road.
            converged = g.amax() < opts.grad_tol * 100.0;
            break;
        };
        let g_new = DVector::from_column_slice(&g_new);
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if !scaled_once {
                let yy = yv.dot(&yv);
                if yy > 0.0 {
                    h = DMatrix::identity(n, n) * (sy / yy);
                }
                scaled_once = true;
            }
            // Inverse BFGS update: H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ.
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            let ss = &s * s.transpose();
            let hys = &hy * s.transpose();
            h += ss * (rho * (1.0 + rho * yhy)) - (&hys + hys.transpose()) * rho;
        }
        let rel_change = (f - f_new).abs() / f_new.abs().max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        if rel_change < opts.rel_f_tol {
            converged = true;
            break;
        }
    }

    Some(BfgsOutcome {
        x: x.as_slice().to_vec(),
        f,
        converged,
    })
}
