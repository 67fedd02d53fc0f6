//! GARCH(1,1) conditional variance with an additive logistic intervention
//! term, fitted by conditionally Gaussian maximum likelihood.
//!
//! The variance recursion is
//!
//! ```text
//! σ²_t = ω + α ε²_{t−1} + β σ²_{t−1} + 1[t ≥ t₀] · a / (1 + b e^{−c τ})
//! ```
//!
//! with τ the days elapsed since the activation day t₀ (a switch to absolute
//! time is available). The logistic term shifts the variance level smoothly
//! from 0 toward `a`; because the shift feeds back through the recursion, the
//! long-run variance moves by `a / (1 − α − β)` once the curve plateaus.
//!
//! The recursion needs a pre-sample state: both σ²₀ and ε²₀ are pinned to the
//! sample variance of the full residual vector, so every in-sample σ²_t is
//! produced by the recursion itself and results are bit-reproducible. The
//! trade-off is that the seed, and hence the whole path, depends on the data
//! through that one statistic; the causality of the recursion proper can be
//! checked by supplying the state explicitly to [`garchl_filter_from`].

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::optim::{minimize, BfgsOptions};

/// Time argument fed to the logistic curve once the intervention is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterventionClock {
    /// Days since activation: τ = t − t₀.
    #[default]
    SinceT0,
    /// Raw day index: τ = t. The curve then sits deep in its saturated
    /// branch for typical rates, producing a near-step at t₀.
    Absolute,
}

/// Parameters of the variance recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchLParams {
    /// Baseline variance level (EUR²).
    pub omega: f64,
    /// Load on the lagged squared residual.
    pub alpha: f64,
    /// Load on the lagged conditional variance.
    pub beta: f64,
    /// Asymptotic height of the logistic shift (EUR²); any sign.
    pub a: f64,
    /// Logistic offset, strictly positive.
    pub b: f64,
    /// Logistic rate per day, strictly positive.
    pub c: f64,
    /// First day index on which the intervention is active.
    pub t0_index: usize,
    pub clock: InterventionClock,
}

impl GarchLParams {
    pub fn new(
        omega: f64,
        alpha: f64,
        beta: f64,
        a: f64,
        b: f64,
        c: f64,
        t0_index: usize,
    ) -> Self {
        GarchLParams {
            omega,
            alpha,
            beta,
            a,
            b,
            c,
            t0_index,
            clock: InterventionClock::SinceT0,
        }
    }

    pub fn with_clock(mut self, clock: InterventionClock) -> Self {
        self.clock = clock;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega, self.alpha, self.beta, self.a, self.b, self.c];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("GARCH parameters must be finite"));
        }
        if self.omega <= 0.0 {
            return Err(Error::invalid(format!("omega must be positive, got {}", self.omega)));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::invalid(format!(
                "alpha ({}) and beta ({}) must be non-negative",
                self.alpha, self.beta
            )));
        }
        if self.alpha + self.beta >= 1.0 {
            return Err(Error::invalid(format!(
                "alpha + beta = {} leaves the stationary region",
                self.alpha + self.beta
            )));
        }
        if self.b <= 0.0 || self.c <= 0.0 {
            return Err(Error::invalid(format!(
                "logistic parameters b ({}) and c ({}) must be positive",
                self.b, self.c
            )));
        }
        Ok(())
    }

    fn theta(&self) -> [f64; 6] {
        [self.omega, self.alpha, self.beta, self.a, self.b, self.c]
    }

    fn with_theta(&self, theta: &[f64; 6]) -> Self {
        GarchLParams {
            omega: theta[0],
            alpha: theta[1],
            beta: theta[2],
            a: theta[3],
            b: theta[4],
            c: theta[5],
            t0_index: self.t0_index,
            clock: self.clock,
        }
    }
}

/// The logistic shift evaluated at a continuous elapsed time `tau`.
pub fn logistic_curve(params: &GarchLParams, tau: f64) -> f64 {
    params.a / (1.0 + params.b * (-params.c * tau).exp())
}

/// The intervention term entering the recursion on day `t`: zero before the
/// activation day, the logistic shift afterwards.
pub fn intervention_value(params: &GarchLParams, t: usize) -> f64 {
    if t < params.t0_index {
        return 0.0;
    }
    let tau = match params.clock {
        InterventionClock::SinceT0 => (t - params.t0_index) as f64,
        InterventionClock::Absolute => t as f64,
    };
    logistic_curve(params, tau)
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn validate_eps(eps: &[f64]) -> Result<()> {
    if eps.len() < 2 {
        return Err(Error::invalid(format!(
            "residual vector must hold at least 2 days, got {}",
            eps.len()
        )));
    }
    if let Some(i) = eps.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "residual vector contains a non-finite value at index {i}"
        )));
    }
    Ok(())
}

/// Runs the variance recursion from an explicit pre-sample state
/// `(sigma2_0, eps_sq_0)`, producing one σ²_t per observation.
pub fn garchl_filter_from(
    eps: &[f64],
    params: &GarchLParams,
    sigma2_0: f64,
    eps_sq_0: f64,
) -> Result<Vec<f64>> {
    params.validate()?;
    validate_eps(eps)?;
    if !(sigma2_0 >= 0.0) || !(eps_sq_0 >= 0.0) {
        return Err(Error::invalid(
            "pre-sample variance state must be non-negative and finite",
        ));
    }
    let mut out = Vec::with_capacity(eps.len());
    let mut prev_sigma2 = sigma2_0;
    let mut prev_eps_sq = eps_sq_0;
    for (t, &e) in eps.iter().enumerate() {
        let s2 = params.omega
            + params.alpha * prev_eps_sq
            + params.beta * prev_sigma2
            + intervention_value(params, t);
        if !s2.is_finite() || s2 <= 0.0 {
            return Err(Error::invalid(format!(
                "conditional variance became non-positive ({s2}) at index {t}"
            )));
        }
        out.push(s2);
        prev_sigma2 = s2;
        prev_eps_sq = e * e;
    }
    Ok(out)
}

/// Runs the variance recursion with the standard pre-sample state, the
/// sample variance of the full residual vector.
pub fn garchl_filter(eps: &[f64], params: &GarchLParams) -> Result<Vec<f64>> {
    validate_eps(eps)?;
    let var = sample_variance(eps);
    garchl_filter_from(eps, params, var, var)
}

const PENALTY_BASE: f64 = 1e10;

/// Core likelihood recursion. Returns the value and, when requested and the
/// path stays valid, the gradient with respect to (ω, α, β, a, b, c). A
/// non-positive variance along the path yields a large finite penalty and no
/// gradient.
fn nll_core(
    theta: &[f64; 6],
    eps: &[f64],
    presample: f64,
    t0: usize,
    clock: InterventionClock,
    want_grad: bool,
) -> (f64, Option<[f64; 6]>) {
    let [omega, alpha, beta, a, b, c] = *theta;
    let n = eps.len();
    let mut value = 0.0;
    let mut grad = [0.0f64; 6];
    // Sensitivities of σ²_t to each parameter, carried through the recursion.
    let mut ds2 = [0.0f64; 6];
    let mut prev_sigma2 = presample;
    let mut prev_eps_sq = presample;
    const LOG_2PI: f64 = 1.8378770664093453;

    for t in 0..n {
        let (iota, di_da, di_db, di_dc) = if t >= t0 {
            let tau = match clock {
                InterventionClock::SinceT0 => (t - t0) as f64,
                InterventionClock::Absolute => t as f64,
            };
            let e = (-c * tau).exp();
            let d = 1.0 + b * e;
            let l = 1.0 / d;
            (a * l, l, -a * e / (d * d), a * b * tau * e / (d * d))
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        let s2 = omega + alpha * prev_eps_sq + beta * prev_sigma2 + iota;
        if !s2.is_finite() || s2 <= 0.0 {
            let violation = if s2.is_finite() { (-s2).min(1e200) } else { 1e200 };
            return (PENALTY_BASE * (1.0 + violation), None);
        }
        if want_grad {
            let new_ds2 = [
                1.0 + beta * ds2[0],
                prev_eps_sq + beta * ds2[1],
                prev_sigma2 + beta * ds2[2],
                di_da + beta * ds2[3],
                di_db + beta * ds2[4],
                di_dc + beta * ds2[5],
            ];
            let e2 = eps[t] * eps[t];
            let w = 0.5 * (1.0 / s2 - e2 / (s2 * s2));
            for k in 0..6 {
                grad[k] += w * new_ds2[k];
            }
            ds2 = new_ds2;
        }
        let e2 = eps[t] * eps[t];
        value += 0.5 * (LOG_2PI + s2.ln() + e2 / s2);
        prev_sigma2 = s2;
        prev_eps_sq = e2;
    }
    if !value.is_finite() {
        return (PENALTY_BASE, None);
    }
    (value, if want_grad { Some(grad) } else { None })
}

/// Negative conditionally Gaussian log-likelihood,
/// `½ Σ_t [log 2π + log σ²_t + ε²_t / σ²_t]`.
///
/// A variance path that turns non-positive (possible while searching with
/// `a < 0`) yields a large finite penalty value rather than an error, so
/// optimizers can probe freely.
pub fn neg_loglik(params: &GarchLParams, eps: &[f64]) -> Result<f64> {
    params.validate()?;
    validate_eps(eps)?;
    let presample = sample_variance(eps);
    let (value, _) = nll_core(
        &params.theta(),
        eps,
        presample,
        params.t0_index,
        params.clock,
        false,
    );
    Ok(value)
}

/// Negative log-likelihood together with its analytic gradient with respect
/// to `(ω, α, β, a, b, c)`. Errors when the variance path is invalid, since
/// no gradient exists there.
pub fn neg_loglik_grad(params: &GarchLParams, eps: &[f64]) -> Result<(f64, [f64; 6])> {
    params.validate()?;
    validate_eps(eps)?;
    let presample = sample_variance(eps);
    let (value, grad) = nll_core(
        &params.theta(),
        eps,
        presample,
        params.t0_index,
        params.clock,
        true,
    );
    match grad {
        Some(g) => Ok((value, g)),
        None => Err(Error::invalid(
            "variance path is non-positive at these parameters; gradient undefined",
        )),
    }
}

/// One optimizer start for [`fit_garchl`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchLStart {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// The default multi-start grid, scaled by the residual sample variance:
/// ω ∈ {0.5, 5}·Var, (α, β) ∈ {(0.1, 0.8), (0.2, 0.6)}, a ∈ {0, ±0.3·Var},
/// b ∈ {10, 100}, c ∈ {0.005, 0.05}.
pub fn default_starts(eps_variance: f64) -> Vec<GarchLStart> {
    let mut starts = Vec::with_capacity(48);
    for &omega in &[0.5 * eps_variance, 5.0 * eps_variance] {
        for &(alpha, beta) in &[(0.1, 0.8), (0.2, 0.6)] {
            for &a in &[0.0, 0.3 * eps_variance, -0.3 * eps_variance] {
                for &b in &[10.0, 100.0] {
                    for &c in &[0.005, 0.05] {
                        starts.push(GarchLStart {
                            omega,
                            alpha,
                            beta,
                            a,
                            b,
                            c,
                        });
                    }
                }
            }
        }
    }
    starts
}

/// A fitted GARCH-Logistic model.
#[derive(Debug, Clone)]
pub struct GarchLFit {
    pub params: GarchLParams,
    /// Standard errors for (ω, α, β, a, b, c); `None` when the Hessian at
    /// the optimum was not invertible.
    pub stderr: Option<[f64; 6]>,
    pub t_stats: Option<[f64; 6]>,
    /// Two-sided p-values against zero, Student's t with n − 6 degrees of
    /// freedom.
    pub p_values: Option<[f64; 6]>,
    pub loglik: f64,
    /// Conditional variance path aligned with the residual vector (EUR²).
    pub sigma2_path: Vec<f64>,
    pub converged: bool,
    pub n_starts: usize,
    /// Index into the start list of the optimum that was kept.
    pub best_start: usize,
}

/// Parameter order used by the stderr/t/p arrays of [`GarchLFit`].
pub const PARAM_NAMES: [&str; 6] = ["omega", "alpha", "beta", "a", "b", "c"];

// Transformed coordinates: u = [ln ω, softmax logits for (α, β), a, ln b, ln c].
fn to_u(start: &GarchLStart) -> [f64; 6] {
    // Project onto the open stationary region so the logit map is defined.
    let alpha = start.alpha.max(1e-8);
    let beta = start.beta.max(1e-8);
    let scale = (alpha + beta).max(1e-8);
    let (alpha, beta) = if alpha + beta > 1.0 - 1e-6 {
        let shrink = (1.0 - 1e-6) / scale;
        (alpha * shrink, beta * shrink)
    } else {
        (alpha, beta)
    };
    let rest = 1.0 - alpha - beta;
    [
        start.omega.ln(),
        (alpha / rest).ln(),
        (beta / rest).ln(),
        start.a,
        start.b.ln(),
        start.c.ln(),
    ]
}

fn from_u(u: &[f64]) -> [f64; 6] {
    // Stabilized softmax over (1, e^{u1}, e^{u2}).
    let m = u[1].max(u[2]).max(0.0);
    let e0 = (-m).exp();
    let e1 = (u[1] - m).exp();
    let e2 = (u[2] - m).exp();
    let s = e0 + e1 + e2;
    [
        u[0].exp(),
        e1 / s,
        e2 / s,
        u[3],
        u[4].exp(),
        u[5].exp(),
    ]
}

/// Chain rule from the gradient in original coordinates to transformed ones.
fn grad_to_u(theta: &[f64; 6], g: &[f64; 6]) -> Vec<f64> {
    let [omega, alpha, beta, _, b, c] = *theta;
    vec![
        g[0] * omega,
        g[1] * alpha * (1.0 - alpha) - g[2] * alpha * beta,
        -g[1] * alpha * beta + g[2] * beta * (1.0 - beta),
        g[3],
        g[4] * b,
        g[5] * c,
    ]
}

struct StartOutcome {
    index: usize,
    u: Vec<f64>,
    f: f64,
    converged: bool,
}

fn optimize_starts(
    eps: &[f64],
    presample: f64,
    t0: usize,
    clock: InterventionClock,
    starts: &[GarchLStart],
) -> Vec<StartOutcome> {
    let opts = BfgsOptions::default();
    let mut outcomes = Vec::new();
    for (index, start) in starts.iter().enumerate() {
        let mut objective = |u: &[f64]| {
            let theta = from_u(u);
            let (f, g) = nll_core(&theta, eps, presample, t0, clock, true);
            (f, g.map(|g| grad_to_u(&theta, &g)))
        };
        let u0 = to_u(start);
        if let Some(out) = minimize(&mut objective, &u0, &opts) {
            if out.f.is_finite() && out.f < PENALTY_BASE {
                outcomes.push(StartOutcome {
                    index,
                    u: out.x,
                    f: out.f,
                    converged: out.converged,
                });
            }
        }
    }
    outcomes
}

fn numeric_hessian(
    theta: &[f64; 6],
    eval: &mut impl FnMut(&[f64; 6]) -> Option<f64>,
) -> Option<nalgebra::DMatrix<f64>> {
    let h: Vec<f64> = theta.iter().map(|t| 1e-4 * t.abs().max(0.01)).collect();
    let f0 = eval(theta)?;
    let mut hess = nalgebra::DMatrix::zeros(6, 6);
    for i in 0..6 {
        let mut up = *theta;
        up[i] += h[i];
        let mut dn = *theta;
        dn[i] -= h[i];
        let (fu, fd) = (eval(&up)?, eval(&dn)?);
        hess[(i, i)] = (fu - 2.0 * f0 + fd) / (h[i] * h[i]);
    }
    for i in 0..6 {
        for j in (i + 1)..6 {
            let mut pp = *theta;
            pp[i] += h[i];
            pp[j] += h[j];
            let mut pm = *theta;
            pm[i] += h[i];
            pm[j] -= h[j];
            let mut mp = *theta;
            mp[i] -= h[i];
            mp[j] += h[j];
            let mut mm = *theta;
            mm[i] -= h[i];
            mm[j] -= h[j];
            let v = (eval(&pp)? - eval(&pm)? - eval(&mp)? + eval(&mm)?) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Some(hess)
}

/// Fits the GARCH-Logistic model by multi-start quasi-Newton maximum
/// likelihood.
///
/// `starts` overrides the default grid; the best converged optimum wins,
/// with earlier starts breaking exact ties so refits are reproducible.
pub fn fit_garchl(
    eps: &[f64],
    t0_index: usize,
    starts: Option<&[GarchLStart]>,
) -> Result<GarchLFit> {
    fit_garchl_with_clock(eps, t0_index, starts, InterventionClock::SinceT0)
}

/// As [`fit_garchl`] with an explicit choice of logistic clock.
pub fn fit_garchl_with_clock(
    eps: &[f64],
    t0_index: usize,
    starts: Option<&[GarchLStart]>,
    clock: InterventionClock,
) -> Result<GarchLFit> {
    validate_eps(eps)?;
    let n = eps.len();
    if n < 200 {
        return Err(Error::invalid(format!(
            "need at least 200 observations to fit, got {n}"
        )));
    }
    if t0_index < 60 || n - t0_index < 60 {
        return Err(Error::invalid(format!(
            "activation day {t0_index} leaves a pre/post segment shorter than 60 of {n} days"
        )));
    }
    let presample = sample_variance(eps);
    if !(presample > 0.0) {
        return Err(Error::invalid(
            "residuals have zero sample variance; nothing to fit",
        ));
    }
    let default_grid;
    let starts = match starts {
        Some(s) => {
            if s.is_empty() {
                return Err(Error::invalid("start list must not be empty"));
            }
            for (i, st) in s.iter().enumerate() {
                let p = GarchLParams::new(st.omega, st.alpha, st.beta, st.a, st.b, st.c, t0_index);
                p.validate()
                    .map_err(|e| Error::invalid(format!("start {i} invalid: {e}")))?;
            }
            s
        }
        None => {
            default_grid = default_starts(presample);
            &default_grid
        }
    };

    let outcomes = optimize_starts(eps, presample, t0_index, clock, starts);
    let best = outcomes
        .iter()
        .filter(|o| o.converged)
        .min_by(|x, y| x.f.partial_cmp(&y.f).expect("finite").then(x.index.cmp(&y.index)));
    let Some(best) = best else {
        let finite = outcomes.len();
        return Err(Error::Optimization(format!(
            "no start converged: {} of {} starts reached a finite optimum, best value {}",
            finite,
            starts.len(),
            outcomes
                .iter()
                .map(|o| o.f)
                .fold(f64::INFINITY, f64::min)
        )));
    };

    let mut theta = from_u(&best.u);
    // The softmax can land within rounding of the stationarity boundary;
    // nudge back inside so the returned parameters validate.
    let persistence = theta[1] + theta[2];
    if persistence >= 1.0 - 1e-12 {
        let shrink = (1.0 - 1e-9) / persistence;
        theta[1] *= shrink;
        theta[2] *= shrink;
    }
    let params = GarchLParams::new(
        theta[0], theta[1], theta[2], theta[3], theta[4], theta[5], t0_index,
    )
    .with_clock(clock);
    params.validate().map_err(|e| {
        Error::Optimization(format!("optimum left the valid parameter region: {e}"))
    })?;
    let sigma2_path = garchl_filter(eps, &params)
        .map_err(|e| Error::Optimization(format!("optimum produced an invalid path: {e}")))?;
    let (nll, _) = nll_core(&params.theta(), eps, presample, t0_index, clock, false);

    let mut eval = |th: &[f64; 6]| {
        let p = params.with_theta(th);
        if p.validate().is_err() {
            return None;
        }
        let (f, _) = nll_core(th, eps, presample, t0_index, clock, false);
        (f.is_finite() && f < PENALTY_BASE).then_some(f)
    };
    let mut stderr = None;
    let mut t_stats = None;
    let mut p_values = None;
    if let Some(hess) = numeric_hessian(&params.theta(), &mut eval) {
        if let Some(chol) = nalgebra::Cholesky::new(hess) {
            let cov = chol.inverse();
            let diag: Vec<f64> = (0..6).map(|i| cov[(i, i)]).collect();
            if diag.iter().all(|v| *v > 0.0 && v.is_finite()) {
                let se: [f64; 6] = std::array::from_fn(|i| diag[i].sqrt());
                let theta = params.theta();
                let ts: [f64; 6] = std::array::from_fn(|i| theta[i] / se[i]);
                let df = (n - 6) as f64;
                let dist = StudentsT::new(0.0, 1.0, df)
                    .map_err(|e| Error::invalid(format!("invalid t distribution: {e}")))?;
                let ps: [f64; 6] = std::array::from_fn(|i| 2.0 * dist.sf(ts[i].abs()));
                stderr = Some(se);
                t_stats = Some(ts);
                p_values = Some(ps);
            }
        }
    }

    Ok(GarchLFit {
        params,
        stderr,
        t_stats,
        p_values,
        loglik: -nll,
        sigma2_path,
        converged: best.converged,
        n_starts: starts.len(),
        best_start: best.index,
    })
}

/// A plain GARCH(1,1) fit, used as the no-intervention reference model.
#[derive(Debug, Clone, Copy)]
pub struct Garch11Fit {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub loglik: f64,
    pub converged: bool,
}

/// Fits a plain GARCH(1,1) by the same likelihood with the logistic term
/// disabled.
pub fn fit_garch11(eps: &[f64]) -> Result<Garch11Fit> {
    validate_eps(eps)?;
    let n = eps.len();
    if n < 50 {
        return Err(Error::invalid(format!(
            "need at least 50 observations to fit, got {n}"
        )));
    }
    let presample = sample_variance(eps);
    if !(presample > 0.0) {
        return Err(Error::invalid(
            "residuals have zero sample variance; nothing to fit",
        ));
    }
    let opts = BfgsOptions::default();
    let mut best: Option<(f64, Vec<f64>, bool, usize)> = None;
    for (index, &(omega, alpha, beta)) in [
        (0.5, 0.1, 0.8),
        (0.5, 0.2, 0.6),
        (5.0, 0.1, 0.8),
        (5.0, 0.2, 0.6),
    ]
    .iter()
    .enumerate()
    {
        let start = GarchLStart {
            omega: omega * presample,
            alpha,
            beta,
            a: 0.0,
            b: 1.0,
            c: 1.0,
        };
        let u0 = to_u(&start);
        let mut objective = |u: &[f64]| {
            let full = from_u(&[u[0], u[1], u[2], 0.0, 0.0, 0.0]);
            let theta = [full[0], full[1], full[2], 0.0, 1.0, 1.0];
            let (f, g) = nll_core(&theta, eps, presample, n, InterventionClock::SinceT0, true);
            (
                f,
                g.map(|g| {
                    let gu = grad_to_u(&theta, &g);
                    vec![gu[0], gu[1], gu[2]]
                }),
            )
        };
        if let Some(out) = minimize(&mut objective, &u0[..3], &opts) {
            if out.f.is_finite()
                && out.f < PENALTY_BASE
                && out.converged
                && best.as_ref().is_none_or(|(f, ..)| out.f < *f)
            {
                best = Some((out.f, out.x, out.converged, index));
            }
        }
    }
    let Some((f, u, converged, _)) = best else {
        return Err(Error::Optimization(
            "no start converged for the plain GARCH fit".to_string(),
        ));
    };
    let full = from_u(&[u[0], u[1], u[2], 0.0, 0.0, 0.0]);
    Ok(Garch11Fit {
        omega: full[0],
        alpha: full[1],
        beta: full[2],
        loglik: -f,
        converged,
    })
}
