//! Daily price panel generator with known ground truth.
//!
//! Prices are drawn from the same family of models the estimators fit: an
//! additive conditional mean over calendar covariates, lagged prices, and
//! renewable in-feed, with GARCH-Logistic innovations. Every generated day
//! carries its true conditional mean, conditional variance, and innovation,
//! so estimates can be compared against the exact quantities that produced
//! the data.
//!
//! Generation is reproducible: the same [`SimSpec`] always yields
//! bit-identical output. A 60-day warm-up window is simulated before the
//! reported span so lag-buffer and variance-seed transients die out; the
//! warm-up is discarded and never overlaps the intervention.

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calendar::{build_calendar, fixed_date_holidays};
use crate::error::{Error, Result};
use crate::garch::{intervention_value, GarchLParams};
use crate::series::DailySeries;

/// Warm-up days simulated before the reported window and discarded.
pub const BURN_IN_DAYS: usize = 60;

/// True conditional-mean components of the data-generating process.
///
/// The deterministic part is built from low-order trigonometric shapes so
/// that spline recovery of each component is well-posed. Lagged prices enter
/// linearly:
///
/// ```text
/// p_t = level + trend(t) + annual(dayyear_t) + weekday(dayweek_t)
///     + bank_coefficient·bank_t + res_slope·ln(res_t / res_base)
///     + phi1·p_{t−1} + phi7·p_{t−7} + ε_t
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct MeanComponents {
    /// Constant price level before lag feedback (EUR/MWh).
    pub level: f64,
    /// Amplitude of a half-period sine over the sample span.
    pub trend_amplitude: f64,
    /// Amplitude of the annual sinusoid over day-of-year codes.
    pub annual_amplitude: f64,
    /// Additive weekday effects, Monday through Sunday.
    pub weekday: [f64; 7],
    /// Price shift on bank holidays.
    pub bank_coefficient: f64,
    /// Load on the one-day lagged price.
    pub phi1: f64,
    /// Load on the seven-day lagged price.
    pub phi7: f64,
    /// Slope of the log-renewables effect; negative means high in-feed
    /// depresses prices.
    pub res_slope: f64,
}

impl Default for MeanComponents {
    fn default() -> Self {
        MeanComponents {
            level: 25.0,
            trend_amplitude: 5.0,
            annual_amplitude: 8.0,
            weekday: [2.0, 1.0, 0.5, 0.5, 1.0, -2.0, -3.0],
            bank_coefficient: -4.0,
            phi1: 0.35,
            phi7: 0.15,
            res_slope: -6.0,
        }
    }
}

impl MeanComponents {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            self.level,
            self.trend_amplitude,
            self.annual_amplitude,
            self.bank_coefficient,
            self.phi1,
            self.phi7,
            self.res_slope,
        ];
        if scalars.iter().chain(self.weekday.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("mean components must be finite"));
        }
        if self.phi1.abs() + self.phi7.abs() >= 1.0 {
            return Err(Error::invalid(format!(
                "lag coefficients are explosive: |phi1| + |phi7| = {} must stay below 1",
                self.phi1.abs() + self.phi7.abs()
            )));
        }
        Ok(())
    }

    /// True trend component at observed day `index` (of `n_days`).
    pub fn trend_value(&self, index: f64, n_days: usize) -> f64 {
        self.trend_amplitude * (std::f64::consts::PI * index / n_days as f64).sin()
    }

    /// True annual component at a day-of-year code in 1..=365.
    pub fn annual_value(&self, dayyear_code: f64) -> f64 {
        self.annual_amplitude * (2.0 * std::f64::consts::PI * dayyear_code / 365.0).sin()
    }

    /// True weekday component at a Monday=1..Sunday=7 code.
    pub fn weekday_value(&self, dayweek_code: f64) -> f64 {
        self.weekday[(dayweek_code as usize).clamp(1, 7) - 1]
    }

    /// True renewable in-feed effect at level `res`, relative to `res_base`.
    pub fn res_value(&self, res: f64, res_base: f64) -> f64 {
        self.res_slope * (res / res_base).ln()
    }
}

/// Exogenous renewable-generation process: log-normal variation around a
/// sinusoidal annual profile, positive by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResProcess {
    /// Central generation level (MWh).
    pub base: f64,
    /// Amplitude of the annual profile on the log scale.
    pub seasonal_amplitude: f64,
    /// Standard deviation of the day-to-day log-scale noise.
    pub noise_sd: f64,
}

impl Default for ResProcess {
    fn default() -> Self {
        ResProcess {
            base: 3000.0,
            seasonal_amplitude: 0.3,
            noise_sd: 0.25,
        }
    }
}

impl ResProcess {
    pub fn validate(&self) -> Result<()> {
        if !(self.base > 0.0 && self.base.is_finite()) {
            return Err(Error::invalid("res base level must be positive and finite"));
        }
        if !self.seasonal_amplitude.is_finite() || !(self.noise_sd >= 0.0) {
            return Err(Error::invalid(
                "res seasonal amplitude must be finite and noise sd non-negative",
            ));
        }
        Ok(())
    }

    fn value(&self, dayyear_code: f64, noise: f64) -> f64 {
        let season = self.seasonal_amplitude
            * (2.0 * std::f64::consts::PI * (dayyear_code - 90.0) / 365.0).sin();
        self.base * (season + self.noise_sd * noise).exp()
    }
}

/// Full specification of one simulated study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub n_days: usize,
    pub start_date: NaiveDate,
    /// Observed-day index on which the intervention activates.
    pub t0_index: usize,
    pub mean: MeanComponents,
    /// Variance truth; its own `t0_index` must equal the spec's.
    pub garch: GarchLParams,
    pub res: ResProcess,
    pub seed: u64,
}

impl SimSpec {
    /// A spec with consistent intervention indices and default mean and
    /// renewables processes.
    pub fn new(
        n_days: usize,
        start_date: NaiveDate,
        t0_index: usize,
        garch: GarchLParams,
        seed: u64,
    ) -> Self {
        SimSpec {
            n_days,
            start_date,
            t0_index,
            garch: GarchLParams { t0_index, ..garch },
            res: ResProcess::default(),
            mean: MeanComponents::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mean.validate()?;
        self.res.validate()?;
        self.garch.validate()?;
        if self.t0_index <= BURN_IN_DAYS || self.t0_index + BURN_IN_DAYS >= self.n_days {
            return Err(Error::invalid(format!(
                "intervention day {} must lie strictly inside ({}, {})",
                self.t0_index,
                BURN_IN_DAYS,
                self.n_days.saturating_sub(BURN_IN_DAYS)
            )));
        }
        if self.garch.t0_index != self.t0_index {
            return Err(Error::invalid(format!(
                "variance truth activates on day {} but the spec says {}",
                self.garch.t0_index, self.t0_index
            )));
        }
        Ok(())
    }
}

/// Per-day ground truth attached to a simulated study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    /// True conditional mean μ_t (EUR/MWh).
    pub mu: Vec<f64>,
    /// True conditional variance σ²_t (EUR²).
    pub sigma2: Vec<f64>,
    /// True innovations ε_t = σ_t z_t (EUR/MWh).
    pub eps: Vec<f64>,
}

/// One simulated study: observable data plus the truth that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedStudy {
    pub prices: DailySeries,
    pub res: DailySeries,
    pub truth: SimTruth,
    /// Holiday calendar used for the bank dummy, warm-up included.
    pub holidays: BTreeSet<NaiveDate>,
}

/// Draws one study from the data-generating process.
///
/// Per-day draw order is fixed (renewables noise, then the price shock), so
/// two specs differing only in variance parameters share their underlying
/// standard-normal draws.
pub fn simulate(spec: &SimSpec) -> Result<SimulatedStudy> {
    spec.validate()?;
    let total = spec.n_days + BURN_IN_DAYS;
    let sim_start = spec.start_date - Duration::days(BURN_IN_DAYS as i64);
    let sim_end = sim_start + Duration::days(total as i64 - 1);
    let holidays = fixed_date_holidays(sim_start, sim_end);
    let cal = build_calendar(sim_start, total, &holidays)?;
    let garch = GarchLParams {
        t0_index: spec.t0_index + BURN_IN_DAYS,
        ..spec.garch
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = StandardNormal;

    let stationary_mean = spec.mean.level / (1.0 - spec.mean.phi1 - spec.mean.phi7);
    let mut price_hist = [stationary_mean; 7];
    let uncond_var = garch.omega / (1.0 - garch.alpha - garch.beta);
    let mut prev_sigma2 = uncond_var;
    let mut prev_eps_sq = uncond_var;

    let mut prices = Vec::with_capacity(total);
    let mut res_series = Vec::with_capacity(total);
    let mut mu_path = Vec::with_capacity(total);
    let mut sigma2_path = Vec::with_capacity(total);
    let mut eps_path = Vec::with_capacity(total);

    for t in 0..total {
        let res_noise: f64 = normal.sample(&mut rng);
        let z: f64 = normal.sample(&mut rng);

        let res = spec.res.value(cal.dayyear[t], res_noise);
        let observed_index = t as f64 - BURN_IN_DAYS as f64;
        let deterministic = spec.mean.level
            + spec.mean.trend_value(observed_index, spec.n_days)
            + spec.mean.annual_value(cal.dayyear[t])
            + spec.mean.weekday_value(cal.dayweek[t])
            + spec.mean.bank_coefficient * cal.bank[t]
            + spec.mean.res_value(res, spec.res.base);
        let mu = deterministic
            + spec.mean.phi1 * price_hist[(t + 6) % 7]
            + spec.mean.phi7 * price_hist[t % 7];

        let sigma2 = garch.omega
            + garch.alpha * prev_eps_sq
            + garch.beta * prev_sigma2
            + intervention_value(&garch, t);
        let eps = sigma2.sqrt() * z;
        let price = mu + eps;

        prices.push(price);
        res_series.push(res);
        mu_path.push(mu);
        sigma2_path.push(sigma2);
        eps_path.push(eps);

        prev_sigma2 = sigma2;
        prev_eps_sq = eps * eps;
        price_hist[t % 7] = price;
    }

    let keep = BURN_IN_DAYS..total;
    Ok(SimulatedStudy {
        prices: DailySeries::new(spec.start_date, prices[keep.clone()].to_vec())?,
        res: DailySeries::new(spec.start_date, res_series[keep.clone()].to_vec())?,
        truth: SimTruth {
            mu: mu_path[keep.clone()].to_vec(),
            sigma2: sigma2_path[keep.clone()].to_vec(),
            eps: eps_path[keep].to_vec(),
        },
        holidays,
    })
}

/// Draws two studies sharing every random draw, differing only in the
/// intervention height: the first has `a = 0`, the second uses the spec as
/// given. Pre-intervention observations are identical across the pair.
pub fn simulate_null_pair(spec: &SimSpec) -> Result<(SimulatedStudy, SimulatedStudy)> {
    let mut null_spec = spec.clone();
    null_spec.garch.a = 0.0;
    Ok((simulate(&null_spec)?, simulate(spec)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn flat_mean() -> MeanComponents {
        MeanComponents {
            level: 25.0,
            trend_amplitude: 0.0,
            annual_amplitude: 0.0,
            weekday: [0.0; 7],
            bank_coefficient: 0.0,
            phi1: 0.0,
            phi7: 0.0,
            res_slope: 0.0,
        }
    }

    fn spec_with(garch: GarchLParams, n_days: usize, t0: usize, seed: u64) -> SimSpec {
        SimSpec::new(n_days, d(2015, 1, 1), t0, garch, seed)
    }

    #[test]
    fn unit_variance_noise_has_unit_sample_variance() {
        let garch = GarchLParams::new(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 5000);
        let mut spec = spec_with(garch, 10_000, 5000, 7);
        spec.mean = flat_mean();
        let study = simulate(&spec).unwrap();
        let p = study.prices.to_complete_vec().unwrap();
        let n = p.len() as f64;
        let mean = p.iter().sum::<f64>() / n;
        let var = p.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!((0.95..=1.05).contains(&var), "sample variance {var}");
        assert_abs_diff_eq!(mean, 25.0, epsilon = 0.05);
    }

    #[test]
    fn same_seed_reproduces_bit_identical_output() {
        let garch = GarchLParams::new(5.0, 0.2, 0.6, 8.0, 50.0, 0.02, 300);
        let spec = spec_with(garch, 700, 300, 99);
        let a = simulate(&spec).unwrap();
        let b = simulate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let garch = GarchLParams::new(5.0, 0.2, 0.6, 8.0, 50.0, 0.02, 300);
        let a = simulate(&spec_with(garch, 700, 300, 1)).unwrap();
        let b = simulate(&spec_with(garch, 700, 300, 2)).unwrap();
        assert_ne!(a.prices.values(), b.prices.values());
    }

    #[test]
    fn null_pair_member_equals_explicit_null_simulation() {
        let garch = GarchLParams::new(3.0, 0.15, 0.5, 6.0, 30.0, 0.03, 250);
        let spec = spec_with(garch, 600, 250, 11);
        let (null, effect) = simulate_null_pair(&spec).unwrap();
        let mut explicit = spec.clone();
        explicit.garch.a = 0.0;
        assert_eq!(null, simulate(&explicit).unwrap());
        assert_eq!(effect, simulate(&spec).unwrap());
    }

    #[test]
    fn null_pair_is_identical_before_the_intervention() {
        let garch = GarchLParams::new(3.0, 0.15, 0.5, 6.0, 30.0, 0.03, 250);
        let spec = spec_with(garch, 600, 250, 23);
        let (null, effect) = simulate_null_pair(&spec).unwrap();
        for t in 0..250 {
            assert_eq!(null.prices.value(t), effect.prices.value(t));
            assert_eq!(null.truth.sigma2[t], effect.truth.sigma2[t]);
        }
        assert_ne!(
            null.truth.sigma2[599], effect.truth.sigma2[599],
            "intervention must alter the late path"
        );
    }

    #[test]
    fn late_window_variance_gap_approaches_the_shift_height() {
        // With alpha = beta = 0 there is no feedback, so the paired variance
        // difference equals the logistic term itself.
        let a = 10.0;
        let garch = GarchLParams::new(1.0, 0.0, 0.0, a, 10.0, 0.05, 500);
        let mut spec = spec_with(garch, 1500, 500, 5);
        spec.mean = flat_mean();
        let (null, effect) = simulate_null_pair(&spec).unwrap();
        let last: Vec<f64> = (1500 - 365..1500)
            .map(|t| effect.truth.sigma2[t] - null.truth.sigma2[t])
            .collect();
        let mean_gap = last.iter().sum::<f64>() / last.len() as f64;
        assert!(
            (0.9 * a..=1.1 * a).contains(&mean_gap),
            "late-window gap {mean_gap}"
        );
        // The same bounds hold against the pre-intervention average within
        // a single effect run.
        let pre: f64 =
            effect.truth.sigma2[..500].iter().sum::<f64>() / 500.0;
        let late: f64 = effect.truth.sigma2[1500 - 365..].iter().sum::<f64>() / 365.0;
        assert!((0.9 * a..=1.1 * a).contains(&(late - pre)), "gap {}", late - pre);
    }

    #[test]
    fn standardized_innovations_look_gaussian() {
        let garch = GarchLParams::new(2.0, 0.1, 0.6, 4.0, 20.0, 0.02, 50_000);
        let mut spec = spec_with(garch, 100_000, 50_000, 13);
        spec.mean = flat_mean();
        let study = simulate(&spec).unwrap();
        let z: Vec<f64> = study
            .truth
            .eps
            .iter()
            .zip(&study.truth.sigma2)
            .map(|(e, s2)| e / s2.sqrt())
            .collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let m2 = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = z.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = z.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        let exkurt = m4 / (m2 * m2) - 3.0;
        assert!(skew.abs() < 0.1, "skewness {skew}");
        assert!(exkurt.abs() < 0.2, "excess kurtosis {exkurt}");
    }

    #[test]
    fn renewables_stay_positive_and_seasonal() {
        let garch = GarchLParams::new(2.0, 0.1, 0.6, 4.0, 20.0, 0.02, 300);
        let spec = spec_with(garch, 800, 300, 3);
        let study = simulate(&spec).unwrap();
        let res = study.res.to_complete_vec().unwrap();
        assert!(res.iter().all(|v| *v > 0.0));
        let spread = res.iter().cloned().fold(f64::MIN, f64::max)
            / res.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 1.5, "seasonal plus noise spread {spread}");
    }

    #[test]
    fn truth_vectors_align_with_prices() {
        let garch = GarchLParams::new(5.0, 0.2, 0.6, 8.0, 50.0, 0.02, 300);
        let spec = spec_with(garch, 700, 300, 17);
        let study = simulate(&spec).unwrap();
        assert_eq!(study.truth.mu.len(), 700);
        assert_eq!(study.truth.sigma2.len(), 700);
        assert_eq!(study.truth.eps.len(), 700);
        for t in 0..700 {
            let p = study.prices.value(t).unwrap();
            assert_abs_diff_eq!(
                p,
                study.truth.mu[t] + study.truth.eps[t],
                epsilon = 1e-12 * p.abs().max(1.0)
            );
            assert!(study.truth.sigma2[t] > 0.0);
        }
        assert_eq!(study.prices.start_date(), d(2015, 1, 1));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let garch = GarchLParams::new(5.0, 0.2, 0.6, 8.0, 50.0, 0.02, 60);
        assert!(simulate(&spec_with(garch, 700, 60, 1)).is_err());
        let garch = GarchLParams::new(5.0, 0.2, 0.6, 8.0, 50.0, 0.02, 650);
        assert!(simulate(&spec_with(garch, 700, 650, 1)).is_err());
        let garch = GarchLParams::new(5.0, 0.2, 0.6, 8.0, 50.0, 0.02, 300);
        let mut explosive = spec_with(garch, 700, 300, 1);
        explosive.mean.phi1 = 0.7;
        explosive.mean.phi7 = 0.4;
        let err = simulate(&explosive).unwrap_err();
        assert!(err.to_string().contains("explosive"), "got: {err}");
        let mut mismatched = spec_with(garch, 700, 300, 1);
        mismatched.garch.t0_index = 299;
        assert!(simulate(&mismatched).is_err());
    }
}
