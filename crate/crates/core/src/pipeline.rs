//! End-to-end orchestration of the zonal study: ingest the canonical CSVs,
//! aggregate to daily zone prices, fit the conditional mean, fit both
//! variance models, run the intervention tests, and write per-zone reports
//! with plot-ready CSV files.
//!
//! A run reads one hourly price file covering every requested zone, one
//! daily renewables series per zone (the configured path may carry a
//! `{zone}` placeholder), and one holiday calendar. Zones are independent
//! and processed concurrently; each writes into its own subdirectory of the
//! output directory, and a top-level `summary.json` records which zones
//! succeeded. A fit failure in one zone never stops the others.
//!
//! Per zone `Z` the output directory gains `Z/report_Z.json` plus plot
//! data: `rolling_variance_Z.csv`, `acf_raw_Z.csv`, `acf_resid_Z.csv`,
//! `intervention_garchl_Z.csv`, `intervention_npvar_Z.csv`,
//! `condvar_garchl_Z.csv`, `condvar_npvar_Z.csv`, `res_effect_mean_Z.csv`,
//! and `res_effect_var_Z.csv`.
//!
//! The module also owns the synthetic-dataset emitter behind the CLI's
//! `simulate` command: it renders simulated studies into the same CSV
//! schemas the ingest side reads, so an end-to-end run needs no real data.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::additive::{anova_nested, AdditiveFit, AnovaResult, FittedTerm, TermFit};
use crate::calendar::{build_calendar, fixed_date_holidays};
use crate::error::{Error, Result};
use crate::garch::{fit_garchl, intervention_value, GarchLFit, GarchLParams};
use crate::io::{
    io_err, read_daily_csv, read_holidays, read_hourly_csv, write_daily_csv, write_holidays,
    write_hourly_csv, HourlyRow,
};
use crate::models::{
    fit_mean_model, fit_npvar_model, InterventionTerm, MeanFit, NpVarFit, SmootherSettings,
    TERM_RES,
    MEAN_LAG_BURN_IN, VAR_MA_BURN_IN,
};
use crate::series::{acf, rolling_variance, weighted_daily_average, DailySeries};
use crate::synthetic::{simulate, SimSpec};

/// Highest lag of the autocorrelation diagnostics.
pub const ACF_MAX_LAG: usize = 30;
/// Window of the rolling-variance plot series (days).
pub const ROLLING_WINDOW_DAYS: usize = 30;
/// Hours a day must have for its weighted average to count.
pub const DEFAULT_MIN_HOURS: usize = 20;
/// Grid resolution of the renewables effect curves.
const RES_EFFECT_GRID_POINTS: usize = 200;

/// The interconnector activation date used when a run does not override it.
pub fn default_t0_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 5, 28).expect("valid date")
}

/// Everything one study run needs: which zones, which window, where the
/// inputs live, and where the outputs go.
///
/// `res_path` may contain the literal placeholder `{zone}`, expanded per
/// zone; without it every zone shares one renewables file. A missing
/// `holidays_path` falls back to the built-in fixed-date holidays. The date
/// range is inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub zones: Vec<String>,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    /// Intervention activation date; must lie strictly inside the range.
    pub t0_date: NaiveDate,
    pub prices_path: PathBuf,
    pub res_path: PathBuf,
    pub holidays_path: Option<PathBuf>,
    /// Days with fewer traded hours are treated as missing.
    pub min_hours_per_day: usize,
    pub smoother: SmootherSettings,
    pub out_dir: PathBuf,
    /// Consumed by data simulation; the fitting pipeline is deterministic.
    pub seed: u64,
}

impl RunConfig {
    /// A config over `zones` and an inclusive date window, with default
    /// activation date, aggregation threshold, and smoother settings.
    pub fn new(
        zones: Vec<String>,
        start_date: NaiveDate,
        end_date: NaiveDate,
        prices_path: PathBuf,
        res_path: PathBuf,
        out_dir: PathBuf,
    ) -> Self {
        RunConfig {
            zones,
            start_date,
            end_date,
            t0_date: default_t0_date(),
            prices_path,
            res_path,
            holidays_path: None,
            min_hours_per_day: DEFAULT_MIN_HOURS,
            smoother: SmootherSettings::default(),
            out_dir,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.zones.is_empty() {
            return Err(Error::invalid("zone list must not be empty"));
        }
        let mut seen = BTreeSet::new();
        for zone in &self.zones {
            if zone.trim().is_empty() {
                return Err(Error::invalid("zone identifiers must not be blank"));
            }
            if !seen.insert(zone.as_str()) {
                return Err(Error::invalid(format!("zone `{zone}` listed twice")));
            }
        }
        if self.end_date < self.start_date {
            return Err(Error::invalid(format!(
                "date range {}..{} runs backwards",
                self.start_date, self.end_date
            )));
        }
        if self.t0_date <= self.start_date || self.t0_date >= self.end_date {
            return Err(Error::invalid(format!(
                "activation date {} must lie strictly inside {}..{}",
                self.t0_date, self.start_date, self.end_date
            )));
        }
        if self.min_hours_per_day == 0 || self.min_hours_per_day > 24 {
            return Err(Error::invalid(format!(
                "min_hours_per_day must be in 1..=24, got {}",
                self.min_hours_per_day
            )));
        }
        Ok(())
    }

    /// Days in the inclusive run window.
    pub fn n_days(&self) -> usize {
        (self.end_date - self.start_date).num_days() as usize + 1
    }

    /// Activation day as an offset from the window start.
    pub fn t0_index(&self) -> usize {
        (self.t0_date - self.start_date).num_days() as usize
    }
}

/// Expands the `{zone}` placeholder of a configured input path.
pub fn res_path_for_zone(template: &Path, zone: &str) -> PathBuf {
    match template.to_str() {
        Some(s) if s.contains("{zone}") => PathBuf::from(s.replace("{zone}", zone)),
        _ => template.to_path_buf(),
    }
}

/// A curve indexed by calendar day over the whole run window, `None` where
/// the model defines no value (lead-in days consumed by lags or moving
/// averages).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyCurve {
    pub start_date: NaiveDate,
    pub values: Vec<Option<f64>>,
}

impl DailyCurve {
    fn padded(start_date: NaiveDate, lead: Option<f64>, n_lead: usize, tail: Vec<f64>) -> Self {
        let mut values = vec![lead; n_lead];
        values.extend(tail.into_iter().map(Some));
        DailyCurve { start_date, values }
    }

    pub fn from_series(series: &DailySeries) -> Self {
        DailyCurve {
            start_date: series.start_date(),
            values: (0..series.len()).map(|i| series.value(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_series(&self) -> Result<DailySeries> {
        let vals: Vec<f64> = self.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let missing: Vec<bool> = self.values.iter().map(Option::is_none).collect();
        DailySeries::with_missing(self.start_date, vals, missing)
    }
}

/// One term of an additive fit as reported: name, flexibility used, and the
/// penalty weight that was selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub name: String,
    pub edf: f64,
    pub lambda: Option<f64>,
}

/// Headline numbers of one additive fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothFitReport {
    pub intercept: f64,
    pub terms: Vec<TermReport>,
    pub rss: f64,
    pub total_edf: f64,
    pub n_iter: usize,
    pub converged: bool,
}

impl SmoothFitReport {
    fn from_fit(fit: &AdditiveFit) -> Self {
        SmoothFitReport {
            intercept: fit.intercept,
            terms: fit
                .terms
                .iter()
                .map(|t| TermReport {
                    name: t.name.clone(),
                    edf: t.edf,
                    lambda: t.lambda,
                })
                .collect(),
            rss: fit.rss,
            total_edf: fit.total_edf,
            n_iter: fit.n_iter,
            converged: fit.converged,
        }
    }
}

/// Conditional-mean fit summary plus its adequacy diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanModelReport {
    pub fit: SmoothFitReport,
    /// Residual autocorrelations at lags `0..=30`.
    pub residual_acf: Vec<f64>,
    pub max_abs_residual_acf: f64,
}

/// One row of the variance-model parameter table. Inference columns are
/// absent when the curvature at the optimum was not usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamReport {
    pub name: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub significant_5pct: bool,
}

/// The parametric variance fit: parameter table, fit diagnostics, and its
/// two curves over the run window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchLReport {
    pub parameters: Vec<ParamReport>,
    pub loglik: f64,
    pub alpha_plus_beta: f64,
    pub converged: bool,
    pub n_starts: usize,
    pub best_start: usize,
    /// Fitted logistic shift per day; zero before activation.
    pub intervention: DailyCurve,
    pub conditional_variance: DailyCurve,
}

/// The non-parametric variance fits (with and without the intervention
/// term) and their curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpVarReport {
    pub full: SmoothFitReport,
    pub reduced: SmoothFitReport,
    /// Estimated intervention effect per day, anchored to zero before
    /// activation.
    pub intervention: DailyCurve,
    pub conditional_variance: DailyCurve,
}

/// The full-versus-reduced variance comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaReport {
    pub f_stat: f64,
    pub df_num: f64,
    pub df_den: f64,
    pub p_value: f64,
    pub significant_5pct: bool,
}

impl AnovaReport {
    fn from_result(r: &AnovaResult) -> Self {
        AnovaReport {
            f_stat: r.f_stat,
            df_num: r.df_num,
            df_den: r.df_den,
            p_value: r.p_value,
            significant_5pct: r.p_value < 0.05,
        }
    }
}

/// Volatility levels before and after activation under both models (EUR²).
///
/// "Pre" averages fitted conditional variances over days strictly before
/// the activation day, "post" from the activation day onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilitySummary {
    pub garchl_pre_mean: f64,
    pub garchl_post_mean: f64,
    /// Stationary pre-period level ω̂/(1−α̂−β̂), when α̂+β̂ < 1.
    pub garchl_unconditional_pre: Option<f64>,
    /// Estimated plateau of the logistic shift.
    pub garchl_plateau: f64,
    pub npvar_pre_mean: f64,
    pub npvar_post_mean: f64,
    /// Non-parametric intervention effect on the final day.
    pub npvar_final_shift: f64,
}

/// Everything the study concludes about one zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneReport {
    pub zone: String,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub t0_date: NaiveDate,
    pub n_days: usize,
    pub mean_model: MeanModelReport,
    pub garchl: GarchLReport,
    pub npvar: NpVarReport,
    pub anova: AnovaReport,
    pub volatility: VolatilitySummary,
}

/// Per-zone outcome of a run, reports attached where fitting succeeded.
#[derive(Debug)]
pub struct ZoneOutcome {
    pub zone: String,
    pub result: Result<ZoneReport>,
}

/// What a run produced, in configured zone order.
#[derive(Debug)]
pub struct StudyOutcome {
    pub zones: Vec<ZoneOutcome>,
    pub summary_path: PathBuf,
}

impl StudyOutcome {
    pub fn all_ok(&self) -> bool {
        self.zones.iter().all(|z| z.result.is_ok())
    }

    pub fn n_failed(&self) -> usize {
        self.zones.iter().filter(|z| z.result.is_err()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneStatus {
    Ok,
    Failed,
}

/// One line of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSummary {
    pub zone: String,
    pub status: ZoneStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// The top-level `summary.json`: the config as run plus per-zone status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub config: RunConfig,
    pub n_ok: usize,
    pub n_failed: usize,
    pub zones: Vec<ZoneSummary>,
}

/// Runs the full study over every configured zone and writes all outputs.
///
/// Returns `Err` only for problems that invalidate the whole run (bad
/// config, unreadable or malformed inputs, unusable output directory).
/// Per-zone fitting problems are captured in the outcome and in
/// `summary.json` instead, so one bad zone cannot silence the others.
pub fn run_study(config: &RunConfig) -> Result<StudyOutcome> {
    config.validate()?;
    let rows = read_hourly_csv(&config.prices_path)?;
    let holidays = match &config.holidays_path {
        Some(path) => read_holidays(path)?,
        None => fixed_date_holidays(config.start_date, config.end_date),
    };
    let mut res_by_zone: BTreeMap<&str, DailySeries> = BTreeMap::new();
    for zone in &config.zones {
        let series = read_daily_csv(&res_path_for_zone(&config.res_path, zone))?;
        res_by_zone.insert(zone, series);
    }
    fs::create_dir_all(&config.out_dir).map_err(|e| io_err(&config.out_dir, e))?;

    let zones: Vec<ZoneOutcome> = config
        .zones
        .par_iter()
        .map(|zone| ZoneOutcome {
            zone: zone.clone(),
            result: run_zone(config, zone, &rows, &res_by_zone[zone.as_str()], &holidays),
        })
        .collect();

    let summary = StudySummary {
        config: config.clone(),
        n_ok: zones.iter().filter(|z| z.result.is_ok()).count(),
        n_failed: zones.iter().filter(|z| z.result.is_err()).count(),
        zones: zones
            .iter()
            .map(|z| ZoneSummary {
                zone: z.zone.clone(),
                status: if z.result.is_ok() {
                    ZoneStatus::Ok
                } else {
                    ZoneStatus::Failed
                },
                error: z.result.as_ref().err().map(|e| e.to_string()),
            })
            .collect(),
    };
    let summary_path = config.out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(StudyOutcome { zones, summary_path })
}

/// Aggregates one zone's hourly rows to daily prices clipped to the run
/// window. Days below the hours threshold stay missing; completeness is
/// enforced later, where a fit actually needs it.
pub fn zone_daily_prices(
    config: &RunConfig,
    rows: &[HourlyRow],
    zone: &str,
) -> Result<DailySeries> {
    let panel = crate::io::panel_from_rows(rows, zone)?;
    let (daily, _warnings) = weighted_daily_average(&panel, config.min_hours_per_day)?;
    clip_to_run(&daily, config, &format!("price data for zone {zone}"))
}

fn clip_to_run(series: &DailySeries, config: &RunConfig, what: &str) -> Result<DailySeries> {
    let offset = (config.start_date - series.start_date()).num_days();
    if offset < 0 || series.end_date() < config.end_date {
        return Err(Error::invalid(format!(
            "{what} covers {}..{} but the run needs {}..{}",
            series.start_date(),
            series.end_date(),
            config.start_date,
            config.end_date
        )));
    }
    series.slice(offset as usize, config.n_days())
}

fn require_complete(series: &DailySeries, what: &str) -> Result<()> {
    let gaps: Vec<NaiveDate> = (0..series.len())
        .filter(|&i| series.is_missing(i))
        .map(|i| series.date_at(i))
        .collect();
    if gaps.is_empty() {
        return Ok(());
    }
    let shown = gaps
        .iter()
        .take(3)
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    Err(Error::invalid(format!(
        "{what} has {} unusable day(s) in the run window (first: {shown}); \
         days below the hours threshold are not imputed",
        gaps.len()
    )))
}

fn run_zone(
    config: &RunConfig,
    zone: &str,
    rows: &[HourlyRow],
    res_full: &DailySeries,
    holidays: &BTreeSet<NaiveDate>,
) -> Result<ZoneReport> {
    let n = config.n_days();
    let prices = zone_daily_prices(config, rows, zone)?;
    require_complete(&prices, &format!("price series for zone {zone}"))?;
    let res = clip_to_run(res_full, config, &format!("renewables series for zone {zone}"))?;
    let cal = build_calendar(config.start_date, n, holidays)?;

    let mean = fit_mean_model(&prices, &cal, &res, &config.smoother)?;
    let eps = &mean.residuals;
    let t0_eps = config.t0_index().checked_sub(MEAN_LAG_BURN_IN).ok_or_else(|| {
        Error::invalid(format!(
            "activation date {} falls inside the {MEAN_LAG_BURN_IN}-day lag lead-in",
            config.t0_date
        ))
    })?;

    let garch = fit_garchl(eps.values(), t0_eps, None)?;
    let n_eps = eps.len();
    let cal_eps = cal.slice(MEAN_LAG_BURN_IN, n_eps)?;
    let res_eps = res.slice(MEAN_LAG_BURN_IN, n_eps)?;
    let npvar = |intervention| {
        fit_npvar_model(
            eps.values(),
            &cal_eps,
            &res_eps,
            t0_eps,
            intervention,
            &config.smoother,
        )
    };
    let full = npvar(InterventionTerm::Adaptive)?;
    let reduced = npvar(InterventionTerm::Omitted)?;
    // The nested comparison runs on a third fit that pins the ramp's budget:
    // with an adaptive budget the ramp collapses to a constant whenever the
    // data carry no shift, the full and reduced fits then nearly coincide,
    // and the F test's numerator df degenerates toward zero. The reported
    // curve stays adaptive so a genuinely absent effect is shown as flat.
    let pinned = npvar(InterventionTerm::FixedEdf(
        config.smoother.anova_intervention_edf,
    ))?;
    let anova = anova_nested(&pinned.fit, &reduced.fit)?;

    let report = build_zone_report(config, zone, &mean, &garch, &full, &reduced, &anova)?;
    write_zone_outputs(config, zone, &prices, &mean, &full, &report)?;
    Ok(report)
}

const GARCHL_PARAM_NAMES: [&str; 6] = ["omega", "alpha", "beta", "a", "b", "c"];

fn garchl_table(fit: &GarchLFit) -> Vec<ParamReport> {
    let p = &fit.params;
    let estimates = [p.omega, p.alpha, p.beta, p.a, p.b, p.c];
    (0..6)
        .map(|i| {
            let p_value = fit.p_values.map(|v| v[i]);
            ParamReport {
                name: GARCHL_PARAM_NAMES[i].to_string(),
                estimate: estimates[i],
                stderr: fit.stderr.map(|v| v[i]),
                t_stat: fit.t_stats.map(|v| v[i]),
                p_value,
                significant_5pct: p_value.map(|p| p < 0.05).unwrap_or(false),
            }
        })
        .collect()
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn build_zone_report(
    config: &RunConfig,
    zone: &str,
    mean: &MeanFit,
    garch: &GarchLFit,
    full: &NpVarFit,
    reduced: &NpVarFit,
    anova: &AnovaResult,
) -> Result<ZoneReport> {
    let n = config.n_days();
    let start = config.start_date;
    let t0_eps = garch.params.t0_index;

    let residual_acf = acf(&mean.residuals, ACF_MAX_LAG)?;
    let max_abs_residual_acf = residual_acf[1..]
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));

    // The logistic shift is a pure function of days since activation, so it
    // extends over the lag lead-in the fit never saw; re-basing the clock to
    // the window start makes the curve cover every day of the run.
    let curve_params = GarchLParams {
        t0_index: config.t0_index(),
        ..garch.params.clone()
    };
    let garchl_intervention = DailyCurve {
        start_date: start,
        values: (0..n).map(|t| Some(intervention_value(&curve_params, t))).collect(),
    };
    let garchl_sigma2 = DailyCurve::padded(start, None, MEAN_LAG_BURN_IN, garch.sigma2_path.clone());

    let np_curve = full.intervention_curve().ok_or_else(|| {
        Error::invalid("variance fit carries no intervention term despite requesting one")
    })?;
    let npvar_final_shift = *np_curve.last().expect("non-empty curve");
    // Before activation the ramp is zero and the curve is anchored at zero,
    // so the lead-in days the variance fit drops have value zero exactly.
    let npvar_intervention = DailyCurve::padded(
        start,
        Some(0.0),
        MEAN_LAG_BURN_IN + VAR_MA_BURN_IN,
        np_curve,
    );
    let npvar_sigma2 = DailyCurve::padded(
        start,
        None,
        MEAN_LAG_BURN_IN + VAR_MA_BURN_IN,
        full.predicted_variances(),
    );

    let (g_pre, g_post) = garch.sigma2_path.split_at(t0_eps);
    let ab = garch.params.alpha + garch.params.beta;
    let np_vars = full.predicted_variances();
    let t0_np = full
        .t0_in_window
        .ok_or_else(|| Error::invalid("activation day precedes the variance window"))?;
    let (np_pre, np_post) = np_vars.split_at(t0_np);

    let volatility = VolatilitySummary {
        garchl_pre_mean: mean_of(g_pre),
        garchl_post_mean: mean_of(g_post),
        garchl_unconditional_pre: (ab < 1.0).then(|| garch.params.omega / (1.0 - ab)),
        garchl_plateau: garch.params.a,
        npvar_pre_mean: mean_of(np_pre),
        npvar_post_mean: mean_of(np_post),
        npvar_final_shift,
    };

    Ok(ZoneReport {
        zone: zone.to_string(),
        start_date: start,
        end_date: config.end_date,
        t0_date: config.t0_date,
        n_days: n,
        mean_model: MeanModelReport {
            fit: SmoothFitReport::from_fit(&mean.fit),
            residual_acf,
            max_abs_residual_acf,
        },
        garchl: GarchLReport {
            parameters: garchl_table(garch),
            loglik: garch.loglik,
            alpha_plus_beta: ab,
            converged: garch.converged,
            n_starts: garch.n_starts,
            best_start: garch.best_start,
            intervention: garchl_intervention,
            conditional_variance: garchl_sigma2,
        },
        npvar: NpVarReport {
            full: SmoothFitReport::from_fit(&full.fit),
            reduced: SmoothFitReport::from_fit(&reduced.fit),
            intervention: npvar_intervention,
            conditional_variance: npvar_sigma2,
        },
        anova: AnovaReport::from_result(anova),
        volatility,
    })
}

fn write_zone_outputs(
    config: &RunConfig,
    zone: &str,
    prices: &DailySeries,
    mean: &MeanFit,
    npvar_full: &NpVarFit,
    report: &ZoneReport,
) -> Result<()> {
    let dir = config.out_dir.join(zone);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let file = |prefix: &str, ext: &str| dir.join(format!("{prefix}_{zone}.{ext}"));

    write_json(&file("report", "json"), report)?;

    let rollvar = rolling_variance(prices, ROLLING_WINDOW_DAYS)?;
    write_daily_csv(&file("rolling_variance", "csv"), &rollvar)?;

    let raw_acf = acf(prices, ACF_MAX_LAG)?;
    write_lag_csv(&file("acf_raw", "csv"), &raw_acf)?;
    write_lag_csv(&file("acf_resid", "csv"), &report.mean_model.residual_acf)?;

    write_daily_csv(
        &file("intervention_garchl", "csv"),
        &report.garchl.intervention.to_series()?,
    )?;
    write_daily_csv(
        &file("intervention_npvar", "csv"),
        &report.npvar.intervention.to_series()?,
    )?;
    write_daily_csv(
        &file("condvar_garchl", "csv"),
        &report.garchl.conditional_variance.to_series()?,
    )?;
    write_daily_csv(
        &file("condvar_npvar", "csv"),
        &report.npvar.conditional_variance.to_series()?,
    )?;

    write_effect_csv(&file("res_effect_mean", "csv"), mean.fit.term(TERM_RES))?;
    write_effect_csv(&file("res_effect_var", "csv"), npvar_full.fit.term(TERM_RES))?;
    Ok(())
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| {
        Error::invalid(format!("cannot serialize {}: {e}", path.display()))
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Reads back a JSON artifact written by [`write_json`].
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        row: e.line(),
        column: "json".to_string(),
        message: e.to_string(),
    })
}

/// Writes autocorrelations as `lag,value` rows, lag 0 first.
pub fn write_lag_csv(path: &Path, acf: &[f64]) -> Result<()> {
    let mut text = String::from("lag,value\n");
    for (lag, value) in acf.iter().enumerate() {
        text.push_str(&format!("{lag},{value}\n"));
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes the centered effect curve of a smooth term over an even grid of
/// its covariate. A term that was dropped (degenerate covariate) or is not
/// smooth yields a header-only file.
fn write_effect_csv(path: &Path, term: Option<&FittedTerm>) -> Result<()> {
    let mut text = String::from("res_mwh,effect\n");
    if let Some(term) = term {
        if let TermFit::Smooth(smoother) = &term.fit {
            let lo = term.values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = term.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let step = (hi - lo) / (RES_EFFECT_GRID_POINTS - 1) as f64;
            let grid: Vec<f64> = (0..RES_EFFECT_GRID_POINTS)
                .map(|i| lo + step * i as f64)
                .collect();
            for (x, e) in grid.iter().zip(smoother.predict_centered(&grid)) {
                text.push_str(&format!("{x},{e}\n"));
            }
        }
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// One zone of a synthetic dataset: everything is shared except the
/// intervention plateau, so zones differ only through the effect under
/// study (common random numbers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimZone {
    pub name: String,
    /// Plateau of the injected volatility shift; zero simulates a control.
    pub a: f64,
}

/// Declarative description of a synthetic dataset, deserializable with all
/// fields optional.
///
/// The defaults describe a four-year study with the headline variance
/// parametrization: one zone carrying the documented intervention and one
/// control zone without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimDatasetConfig {
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub t0_date: NaiveDate,
    pub seed: u64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub b: f64,
    pub c: f64,
    pub zones: Vec<SimZone>,
}

impl Default for SimDatasetConfig {
    fn default() -> Self {
        SimDatasetConfig {
            start_date: NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date"),
            n_days: 1461,
            t0_date: default_t0_date(),
            seed: 2016,
            omega: 7.391,
            alpha: 0.222,
            beta: 0.565,
            b: 101.2,
            c: 0.012,
            zones: vec![
                SimZone {
                    name: "SICI".to_string(),
                    a: 10.171,
                },
                SimZone {
                    name: "NORD".to_string(),
                    a: 0.0,
                },
            ],
        }
    }
}

impl SimDatasetConfig {
    pub fn t0_index(&self) -> Result<usize> {
        let offset = (self.t0_date - self.start_date).num_days();
        if offset <= 0 || offset as usize >= self.n_days {
            return Err(Error::invalid(format!(
                "activation date {} must lie strictly inside the {}-day window from {}",
                self.t0_date, self.n_days, self.start_date
            )));
        }
        Ok(offset as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.zones.is_empty() {
            return Err(Error::invalid("synthetic dataset needs at least one zone"));
        }
        let mut seen = BTreeSet::new();
        for zone in &self.zones {
            if zone.name.trim().is_empty() {
                return Err(Error::invalid("zone identifiers must not be blank"));
            }
            if !seen.insert(zone.name.as_str()) {
                return Err(Error::invalid(format!("zone `{}` listed twice", zone.name)));
            }
        }
        self.t0_index()?;
        Ok(())
    }
}

/// Where [`write_synthetic_dataset`] put each artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct SimManifest {
    pub prices_path: PathBuf,
    /// Per-zone renewables template containing the `{zone}` placeholder.
    pub res_path_template: PathBuf,
    pub holidays_path: PathBuf,
    /// Per-zone ground-truth files (`date,mu,sigma2,eps`).
    pub truth_paths: Vec<PathBuf>,
    pub end_date: NaiveDate,
}

/// Renders a synthetic dataset into the canonical CSV schemas.
///
/// Every zone gets 24 hourly rows per day with unit quantity, so the
/// weighted daily average returns the simulated price exactly. All zones
/// share the random seed: draws are common, and zones differ only through
/// their intervention plateau.
pub fn write_synthetic_dataset(config: &SimDatasetConfig, dir: &Path) -> Result<SimManifest> {
    config.validate()?;
    let t0_index = config.t0_index()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut all_rows = Vec::new();
    let mut truth_paths = Vec::new();
    let mut holidays_path = None;
    for zone in &config.zones {
        let garch = GarchLParams::new(
            config.omega,
            config.alpha,
            config.beta,
            zone.a,
            config.b,
            config.c,
            t0_index,
        );
        let spec = SimSpec::new(config.n_days, config.start_date, t0_index, garch, config.seed);
        let study = simulate(&spec)?;

        for d in 0..config.n_days {
            let date = study.prices.date_at(d);
            let price = study.prices.value(d).ok_or_else(|| {
                Error::invalid(format!("simulated price missing on {date}"))
            })?;
            for hour in 1..=24u8 {
                all_rows.push(HourlyRow {
                    date,
                    hour,
                    zone: zone.name.clone(),
                    price_eur_mwh: price,
                    quantity_mwh: 1.0,
                });
            }
        }

        write_daily_csv(&dir.join(format!("res_{}.csv", zone.name)), &study.res)?;

        let truth_path = dir.join(format!("truth_{}.csv", zone.name));
        let mut text = String::from("date,mu,sigma2,eps\n");
        for d in 0..config.n_days {
            text.push_str(&format!(
                "{},{},{},{}\n",
                study.prices.date_at(d),
                study.truth.mu[d],
                study.truth.sigma2[d],
                study.truth.eps[d]
            ));
        }
        fs::write(&truth_path, text).map_err(|e| io_err(&truth_path, e))?;
        truth_paths.push(truth_path);

        if holidays_path.is_none() {
            let path = dir.join("holidays.txt");
            write_holidays(&path, &study.holidays)?;
            holidays_path = Some(path);
        }
    }

    let prices_path = dir.join("prices.csv");
    write_hourly_csv(&prices_path, &all_rows)?;

    Ok(SimManifest {
        prices_path,
        res_path_template: dir.join("res_{zone}.csv"),
        holidays_path: holidays_path.expect("at least one zone"),
        truth_paths,
        end_date: config.start_date + chrono::Duration::days(config.n_days as i64 - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn base_config(dir: &Path) -> RunConfig {
        RunConfig::new(
            vec!["A".to_string(), "B".to_string()],
            d(2015, 1, 1),
            d(2016, 12, 31),
            dir.join("prices.csv"),
            dir.join("res_{zone}.csv"),
            dir.join("out"),
        )
    }

    #[test]
    fn config_validation_catches_structural_mistakes() {
        let tmp = tempfile::tempdir().unwrap();
        let ok = base_config(tmp.path());
        assert!(ok.validate().is_ok());
        assert_eq!(ok.n_days(), 731);
        assert_eq!(ok.t0_index(), 513);

        let mut empty = ok.clone();
        empty.zones.clear();
        assert!(empty.validate().is_err());

        let mut dup = ok.clone();
        dup.zones = vec!["A".into(), "A".into()];
        assert!(dup.validate().is_err());

        let mut blank = ok.clone();
        blank.zones = vec!["  ".into()];
        assert!(blank.validate().is_err());

        let mut backwards = ok.clone();
        backwards.end_date = d(2014, 1, 1);
        assert!(backwards.validate().is_err());

        let mut t0_at_start = ok.clone();
        t0_at_start.t0_date = t0_at_start.start_date;
        assert!(t0_at_start.validate().is_err());

        let mut t0_at_end = ok.clone();
        t0_at_end.t0_date = t0_at_end.end_date;
        assert!(t0_at_end.validate().is_err());

        let mut hours = ok.clone();
        hours.min_hours_per_day = 0;
        assert!(hours.validate().is_err());
        hours.min_hours_per_day = 25;
        assert!(hours.validate().is_err());
    }

    #[test]
    fn res_path_template_expands_per_zone() {
        assert_eq!(
            res_path_for_zone(Path::new("/data/res_{zone}.csv"), "SICI"),
            PathBuf::from("/data/res_SICI.csv")
        );
        assert_eq!(
            res_path_for_zone(Path::new("/data/res.csv"), "SICI"),
            PathBuf::from("/data/res.csv")
        );
    }

    #[test]
    fn daily_curve_pads_and_round_trips_through_series() {
        let curve = DailyCurve::padded(d(2015, 1, 1), None, 2, vec![1.5, 2.5]);
        assert_eq!(curve.len(), 4);
        assert_eq!(curve.values[..2], [None, None]);
        let series = curve.to_series().unwrap();
        assert!(series.is_missing(0) && series.is_missing(1));
        assert_eq!(series.value(2), Some(1.5));
        assert_eq!(DailyCurve::from_series(&series), curve);
    }

    #[test]
    fn synthetic_dataset_is_deterministic_and_loads_back() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = SimDatasetConfig::default();
        config.start_date = d(2015, 1, 1);
        config.n_days = 200;
        config.t0_date = d(2015, 4, 11);
        config.zones = vec![
            SimZone {
                name: "A".to_string(),
                a: 5.0,
            },
            SimZone {
                name: "B".to_string(),
                a: 0.0,
            },
        ];

        let dir1 = tmp.path().join("one");
        let dir2 = tmp.path().join("two");
        let manifest = write_synthetic_dataset(&config, &dir1).unwrap();
        write_synthetic_dataset(&config, &dir2).unwrap();

        for name in ["prices.csv", "res_A.csv", "res_B.csv", "holidays.txt", "truth_A.csv"] {
            let one = fs::read(dir1.join(name)).unwrap();
            let two = fs::read(dir2.join(name)).unwrap();
            assert_eq!(one, two, "{name} differs between identical runs");
            assert!(!one.is_empty());
        }

        let rows = read_hourly_csv(&manifest.prices_path).unwrap();
        assert_eq!(rows.len(), 2 * 200 * 24);
        assert_eq!(crate::io::zones_in_rows(&rows), vec!["A", "B"]);

        // Unit quantities make the weighted average reproduce the simulated
        // daily price, and both zones share their price draws up to the
        // variance shift, so pre-activation prices coincide.
        let config_run = RunConfig::new(
            vec!["A".into(), "B".into()],
            config.start_date,
            d(2015, 7, 19),
            manifest.prices_path.clone(),
            manifest.res_path_template.clone(),
            tmp.path().join("out"),
        );
        let a = zone_daily_prices(&config_run, &rows, "A").unwrap();
        let b = zone_daily_prices(&config_run, &rows, "B").unwrap();
        assert!(a.is_complete() && b.is_complete());
        for t in 0..100 {
            assert_eq!(a.value(t), b.value(t), "pre-activation day {t}");
        }

        for path in &manifest.truth_paths {
            let text = fs::read_to_string(path).unwrap();
            for line in text.lines().skip(1) {
                let sigma2: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
                assert!(sigma2 > 0.0, "non-positive truth variance: {line}");
            }
        }
    }

    #[test]
    fn sim_config_rejects_bad_layouts() {
        let mut config = SimDatasetConfig::default();
        config.zones.clear();
        assert!(config.validate().is_err());

        let mut dup = SimDatasetConfig::default();
        dup.zones = vec![
            SimZone {
                name: "A".into(),
                a: 1.0,
            },
            SimZone {
                name: "A".into(),
                a: 0.0,
            },
        ];
        assert!(dup.validate().is_err());

        let mut outside = SimDatasetConfig::default();
        outside.t0_date = outside.start_date;
        assert!(outside.validate().is_err());
    }

    #[test]
    fn run_config_serializes_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let config = base_config(tmp.path());
        let text = serde_json::to_string(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }
}
