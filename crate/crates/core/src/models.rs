//! The two study models built on the additive engine: the conditional mean
//! of daily prices and the non-parametric conditional variance of its
//! residuals.
//!
//! The mean model regresses the price on a long-run trend, annual and weekly
//! cycles, a bank-holiday dummy, the one- and seven-day lagged prices, and
//! the renewable in-feed. The variance model regresses the squared mean
//! residual on a linear ramp counting days since the intervention, the same
//! calendar terms, the lagged squared residual, its trailing 14-day moving
//! average, and the renewable in-feed. Leaving the ramp term out yields the
//! reduced model for the nested variance comparison.
//!
//! Both builders drop a short lead-in from the front of their window (7 days
//! for the price lags, a further 14 for the moving average) so every
//! covariate is observed rather than imputed.

use chrono::Duration;

use crate::additive::{fit_additive, AdditiveFit, BasisSpec, LambdaPolicy, TermFit, TermSpec};
use crate::calendar::CalendarDesign;
use crate::error::{Error, Result};
use crate::series::DailySeries;
use crate::smoother::default_lambda_grid;

pub const TERM_TREND: &str = "trend";
pub const TERM_DAYYEAR: &str = "dayyear";
pub const TERM_DAYWEEK: &str = "dayweek";
pub const TERM_BANK: &str = "bank";
pub const TERM_PRICE_LAG1: &str = "price_lag1";
pub const TERM_PRICE_LAG7: &str = "price_lag7";
pub const TERM_RES: &str = "res";
pub const TERM_INTERVENTION: &str = "intervention";
pub const TERM_EPS2_LAG1: &str = "eps2_lag1";
pub const TERM_EPS2_MA14: &str = "eps2_ma14";

/// Days dropped from the front of the mean-model window so both price lags
/// are observed.
pub const MEAN_LAG_BURN_IN: usize = 7;
/// Days dropped from the front of the variance-model window so the trailing
/// moving average is fully observed.
pub const VAR_MA_BURN_IN: usize = 14;
/// Lower bound applied to predicted conditional variances (EUR²).
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Knot counts and backfitting controls shared by both model builders.
///
/// Deserializes with every omitted field taking its default, so a config
/// file only needs to spell out what it changes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SmootherSettings {
    /// Interior knots of the long-run trend smooth.
    pub trend_knots: usize,
    /// Segments of the cyclic day-of-year smooth (period 365).
    pub dayyear_knots: usize,
    /// Segments of the cyclic day-of-week smooth (period 7).
    pub dayweek_knots: usize,
    /// Interior knots of the lagged-price and lagged-residual smooths.
    pub lag_knots: usize,
    /// Interior knots of the renewable in-feed smooth.
    pub res_knots: usize,
    /// Interior knots of the intervention-ramp smooth.
    pub intervention_knots: usize,
    /// Effective degrees of freedom spent on the ramp when a variance fit
    /// pins it for the nested comparison (see [`InterventionTerm::FixedEdf`]).
    pub anova_intervention_edf: f64,
    pub lambda_grid: Vec<f64>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SmootherSettings {
    fn default() -> Self {
        SmootherSettings {
            trend_knots: 20,
            dayyear_knots: 20,
            dayweek_knots: 7,
            lag_knots: 10,
            res_knots: 10,
            intervention_knots: 10,
            anova_intervention_edf: 4.0,
            lambda_grid: default_lambda_grid(),
            max_iter: 400,
            tol: 1e-6,
        }
    }
}

impl SmootherSettings {
    /// Settings with every knot count scaled by `factor`, used for
    /// sensitivity checks. The weekly smooth keeps one segment per weekday:
    /// its resolution is structural, not tunable, and a cyclic cubic basis
    /// needs at least four segments anyway.
    pub fn with_knot_factor(&self, factor: f64) -> Self {
        let scale = |k: usize| ((k as f64 * factor).round() as usize).max(1);
        SmootherSettings {
            trend_knots: scale(self.trend_knots),
            dayyear_knots: scale(self.dayyear_knots).max(4),
            dayweek_knots: self.dayweek_knots,
            lag_knots: scale(self.lag_knots),
            res_knots: scale(self.res_knots),
            intervention_knots: scale(self.intervention_knots),
            anova_intervention_edf: self.anova_intervention_edf,
            lambda_grid: self.lambda_grid.clone(),
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    fn policy(&self) -> LambdaPolicy {
        LambdaPolicy::Gcv(self.lambda_grid.clone())
    }
}

/// How the intervention ramp enters a variance model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterventionTerm {
    /// Leave the ramp out, giving the reduced model of the nested comparison.
    Omitted,
    /// Include it with a GCV-chosen budget; this is the reported estimate.
    Adaptive,
    /// Include it spending a fixed effective-df budget. The nested comparison
    /// needs this: when no intervention is present GCV collapses the ramp to
    /// a constant, the full and reduced fits nearly coincide, and the F
    /// statistic's numerator degrees of freedom degenerate toward zero.
    FixedEdf(f64),
}

/// The ramp covariate driving the variance intervention term: zero through
/// the activation day, then counting days elapsed since it.
pub fn intervention_ramp(len: usize, t0_index: usize) -> Vec<f64> {
    (0..len)
        .map(|t| if t > t0_index { (t - t0_index) as f64 } else { 0.0 })
        .collect()
}

fn check_alignment(cal: &CalendarDesign, series: &DailySeries, what: &str) -> Result<()> {
    if series.start_date() != cal.start_date() || series.len() != cal.len() {
        return Err(Error::invalid(format!(
            "{what} covers {}..{} ({} days) but the calendar covers {}..{} ({} days)",
            series.start_date(),
            series.end_date(),
            series.len(),
            cal.start_date(),
            cal.end_date(),
            cal.len()
        )));
    }
    if !series.is_complete() {
        return Err(Error::invalid(format!(
            "{what} has missing days; fill or trim gaps before fitting"
        )));
    }
    Ok(())
}

fn is_degenerate(xs: &[f64]) -> bool {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    !(hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1.0))
}

/// Adds a smooth term unless its covariate is constant, in which case the
/// term is unidentifiable against the intercept and is skipped.
fn push_smooth(
    terms: &mut Vec<TermSpec>,
    name: &str,
    values: Vec<f64>,
    basis: BasisSpec,
    policy: LambdaPolicy,
) {
    if !is_degenerate(&values) {
        terms.push(TermSpec::smooth(name, values, basis, policy));
    }
}

/// A fitted conditional-mean model.
#[derive(Debug, Clone)]
pub struct MeanFit {
    pub fit: AdditiveFit,
    /// Days dropped from the front of the input window for the price lags.
    pub offset: usize,
    /// Mean residuals ε_t, dated from the first fitted day.
    pub residuals: DailySeries,
}

/// Fits the conditional mean of daily prices.
///
/// `prices`, `cal`, and `res` must cover the same complete daily window; the
/// first [`MEAN_LAG_BURN_IN`] days are used only as lag history.
pub fn fit_mean_model(
    prices: &DailySeries,
    cal: &CalendarDesign,
    res: &DailySeries,
    settings: &SmootherSettings,
) -> Result<MeanFit> {
    check_alignment(cal, prices, "price series")?;
    check_alignment(cal, res, "renewables series")?;
    let n = prices.len();
    if n <= MEAN_LAG_BURN_IN + 1 {
        return Err(Error::invalid(format!(
            "need more than {} days to fit the mean model, got {n}",
            MEAN_LAG_BURN_IN + 1
        )));
    }
    let p = prices.values();
    let window = MEAN_LAG_BURN_IN..n;
    let y: Vec<f64> = p[window.clone()].to_vec();
    let lag1: Vec<f64> = window.clone().map(|t| p[t - 1]).collect();
    let lag7: Vec<f64> = window.clone().map(|t| p[t - 7]).collect();
    let res_w: Vec<f64> = res.values()[window.clone()].to_vec();
    let policy = settings.policy();

    let mut terms = Vec::new();
    push_smooth(
        &mut terms,
        TERM_TREND,
        cal.trend[window.clone()].to_vec(),
        BasisSpec::cubic(settings.trend_knots),
        policy.clone(),
    );
    push_smooth(
        &mut terms,
        TERM_DAYYEAR,
        cal.dayyear[window.clone()].to_vec(),
        BasisSpec::cyclic(365.0, settings.dayyear_knots),
        policy.clone(),
    );
    push_smooth(
        &mut terms,
        TERM_DAYWEEK,
        cal.dayweek[window.clone()].to_vec(),
        BasisSpec::cyclic(7.0, settings.dayweek_knots),
        policy.clone(),
    );
    terms.push(TermSpec::dummy(TERM_BANK, cal.bank[window.clone()].to_vec()));
    push_smooth(
        &mut terms,
        TERM_PRICE_LAG1,
        lag1,
        BasisSpec::cubic(settings.lag_knots),
        policy.clone(),
    );
    push_smooth(
        &mut terms,
        TERM_PRICE_LAG7,
        lag7,
        BasisSpec::cubic(settings.lag_knots),
        policy.clone(),
    );
    push_smooth(
        &mut terms,
        TERM_RES,
        res_w,
        BasisSpec::cubic(settings.res_knots),
        policy,
    );

    let fit = fit_additive(&y, terms, settings.max_iter, settings.tol)?;
    let start = prices.start_date() + Duration::days(MEAN_LAG_BURN_IN as i64);
    let residuals = DailySeries::new(start, fit.residuals.clone())?;
    Ok(MeanFit {
        fit,
        offset: MEAN_LAG_BURN_IN,
        residuals,
    })
}

/// A fitted non-parametric conditional-variance model.
#[derive(Debug, Clone)]
pub struct NpVarFit {
    pub fit: AdditiveFit,
    /// Days dropped from the front of the residual window for the moving
    /// average.
    pub offset: usize,
    /// Activation day in fitted-window coordinates, when it falls inside.
    pub t0_in_window: Option<usize>,
    pub has_intervention: bool,
}

impl NpVarFit {
    /// Fitted conditional variances with the positivity floor applied
    /// (EUR²).
    pub fn predicted_variances(&self) -> Vec<f64> {
        self.fit
            .fitted
            .iter()
            .map(|v| v.max(VARIANCE_FLOOR))
            .collect()
    }

    /// The intervention effect per fitted day, anchored so the curve is
    /// exactly zero where the ramp is zero: h₁(Int_t) − h₁(0).
    pub fn intervention_curve(&self) -> Option<Vec<f64>> {
        let term = self.fit.term(TERM_INTERVENTION)?;
        let TermFit::Smooth(smoother) = &term.fit else {
            return None;
        };
        let at_zero = smoother.predict(&[0.0])[0];
        Some(
            term.values
                .iter()
                .map(|x| smoother.predict(&[*x])[0] - at_zero)
                .collect(),
        )
    }
}

/// Fits the conditional variance of mean residuals as an additive model on
/// ε²_t.
///
/// `eps`, `cal`, and `res` must cover the same window (the mean-model
/// residual window); `t0_index` is expressed in that window's coordinates.
/// `intervention` decides whether the ramp term enters and how its budget
/// is chosen.
pub fn fit_npvar_model(
    eps: &[f64],
    cal: &CalendarDesign,
    res: &DailySeries,
    t0_index: usize,
    intervention: InterventionTerm,
    settings: &SmootherSettings,
) -> Result<NpVarFit> {
    fit_npvar_inner(eps, cal, res, t0_index, intervention, None, settings)
}

/// As [`fit_npvar_model`], but every term other than the ramp inherits the
/// penalty weight it resolved to in `shared_from` (falling back to GCV for
/// terms the source fit does not carry).
fn fit_npvar_inner(
    eps: &[f64],
    cal: &CalendarDesign,
    res: &DailySeries,
    t0_index: usize,
    intervention: InterventionTerm,
    shared_from: Option<&AdditiveFit>,
    settings: &SmootherSettings,
) -> Result<NpVarFit> {
    check_alignment(cal, res, "renewables series")?;
    let n = eps.len();
    if n != cal.len() {
        return Err(Error::invalid(format!(
            "residual vector holds {n} days but the calendar covers {}",
            cal.len()
        )));
    }
    if let Some(i) = eps.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "residual vector contains a non-finite value at index {i}"
        )));
    }
    if n <= VAR_MA_BURN_IN + 1 {
        return Err(Error::invalid(format!(
            "need more than {} days to fit the variance model, got {n}",
            VAR_MA_BURN_IN + 1
        )));
    }
    if t0_index >= n {
        return Err(Error::invalid(format!(
            "activation day {t0_index} lies outside the {n}-day residual window"
        )));
    }

    let e2: Vec<f64> = eps.iter().map(|e| e * e).collect();
    let window = VAR_MA_BURN_IN..n;
    let y: Vec<f64> = e2[window.clone()].to_vec();
    let lag1: Vec<f64> = window.clone().map(|t| e2[t - 1]).collect();
    let ma14: Vec<f64> = window
        .clone()
        .map(|t| e2[t - VAR_MA_BURN_IN..t].iter().sum::<f64>() / VAR_MA_BURN_IN as f64)
        .collect();
    let ramp_full = intervention_ramp(n, t0_index);
    let ramp: Vec<f64> = ramp_full[window.clone()].to_vec();
    let res_w: Vec<f64> = res.values()[window.clone()].to_vec();
    let shared = |name: &str| -> LambdaPolicy {
        shared_from
            .and_then(|f| f.term(name))
            .and_then(|t| t.lambda)
            .map(LambdaPolicy::Fixed)
            .unwrap_or_else(|| settings.policy())
    };

    let int_policy = match intervention {
        InterventionTerm::Omitted => None,
        InterventionTerm::Adaptive => Some(settings.policy()),
        InterventionTerm::FixedEdf(e) => Some(LambdaPolicy::FixedEdf(e)),
    };
    let mut terms = Vec::new();
    if let Some(int_policy) = int_policy {
        // First-order difference penalty: heavy smoothing collapses the
        // effect toward a constant, i.e. toward no intervention, instead of
        // leaving a free linear drift the way a curvature penalty would.
        let mut int_basis = BasisSpec::cubic(settings.intervention_knots);
        int_basis.penalty_order = 1;
        push_smooth(&mut terms, TERM_INTERVENTION, ramp, int_basis, int_policy);
    }
    push_smooth(
        &mut terms,
        TERM_DAYYEAR,
        cal.dayyear[window.clone()].to_vec(),
        BasisSpec::cyclic(365.0, settings.dayyear_knots),
        shared(TERM_DAYYEAR),
    );
    push_smooth(
        &mut terms,
        TERM_DAYWEEK,
        cal.dayweek[window.clone()].to_vec(),
        BasisSpec::cyclic(7.0, settings.dayweek_knots),
        shared(TERM_DAYWEEK),
    );
    terms.push(TermSpec::dummy(TERM_BANK, cal.bank[window.clone()].to_vec()));
    push_smooth(
        &mut terms,
        TERM_EPS2_LAG1,
        lag1,
        BasisSpec::cubic(settings.lag_knots),
        shared(TERM_EPS2_LAG1),
    );
    push_smooth(
        &mut terms,
        TERM_EPS2_MA14,
        ma14,
        BasisSpec::cubic(settings.lag_knots),
        shared(TERM_EPS2_MA14),
    );
    push_smooth(
        &mut terms,
        TERM_RES,
        res_w,
        BasisSpec::cubic(settings.res_knots),
        shared(TERM_RES),
    );
    if terms.is_empty() {
        return Err(Error::invalid(
            "every variance covariate is constant; nothing to fit",
        ));
    }

    let fit = fit_additive(&y, terms, settings.max_iter, settings.tol)?;
    Ok(NpVarFit {
        fit,
        offset: VAR_MA_BURN_IN,
        t0_in_window: t0_index.checked_sub(VAR_MA_BURN_IN),
        has_intervention: intervention != InterventionTerm::Omitted,
    })
}
