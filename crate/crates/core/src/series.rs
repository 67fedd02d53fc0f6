//! Daily and hourly series containers with the aggregation, rolling-variance,
//! autocorrelation, and alignment operations the estimators are built on.
//!
//! A [`DailySeries`] is a contiguous run of calendar days starting at a fixed
//! date. Gaps are tracked with an explicit missing mask; the stored value at a
//! missing position is a `NaN` sentinel that is never read by any operation.
//! An [`HourlyPanel`] holds up to 24 hourly observations per day and exists
//! only to be collapsed into a quantity-weighted daily average.

use chrono::{Duration, NaiveDate};

use crate::error::{Error, Result};

/// One hourly market observation: a price and the traded quantity behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourObs {
    /// Price in EUR/MWh.
    pub price: f64,
    /// Quantity in MWh, must be non-negative.
    pub quantity: f64,
}

/// Hourly observations over a contiguous span of days.
///
/// Hours are numbered 1 through 24 following the market convention.
#[derive(Debug, Clone)]
pub struct HourlyPanel {
    start: NaiveDate,
    days: Vec<[Option<HourObs>; 24]>,
}

impl HourlyPanel {
    /// Creates an empty panel covering `n_days` days starting at `start`.
    pub fn new(start: NaiveDate, n_days: usize) -> Result<Self> {
        if n_days == 0 {
            return Err(Error::invalid("hourly panel must cover at least one day"));
        }
        Ok(HourlyPanel {
            start,
            days: vec![[None; 24]; n_days],
        })
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start + Duration::days(self.days.len() as i64 - 1)
    }

    fn day_index(&self, date: NaiveDate) -> Result<usize> {
        let offset = (date - self.start).num_days();
        if offset < 0 || offset as usize >= self.days.len() {
            return Err(Error::invalid(format!(
                "date {date} outside panel span {}..={}",
                self.start,
                self.end_date()
            )));
        }
        Ok(offset as usize)
    }

    /// Records an observation for `date` at `hour` (1..=24).
    ///
    /// Rejects out-of-range hours, non-finite values, negative quantities,
    /// and duplicate (date, hour) cells.
    pub fn set(&mut self, date: NaiveDate, hour: u8, obs: HourObs) -> Result<()> {
        if !(1..=24).contains(&hour) {
            return Err(Error::invalid(format!(
                "hour {hour} out of range 1..=24 on {date}"
            )));
        }
        if !obs.price.is_finite() || !obs.quantity.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite observation on {date} hour {hour}"
            )));
        }
        if obs.quantity < 0.0 {
            return Err(Error::invalid(format!(
                "negative quantity {} on {date} hour {hour}",
                obs.quantity
            )));
        }
        let d = self.day_index(date)?;
        let slot = &mut self.days[d][(hour - 1) as usize];
        if slot.is_some() {
            return Err(Error::invalid(format!(
                "duplicate observation for {date} hour {hour}"
            )));
        }
        *slot = Some(obs);
        Ok(())
    }

    /// Returns the 24 hourly slots of day `index`.
    pub fn day(&self, index: usize) -> &[Option<HourObs>; 24] {
        &self.days[index]
    }
}

/// Why a day was dropped while aggregating hourly data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarningReason {
    /// Fewer hourly observations were present than the configured minimum.
    TooFewHours { present: usize, required: usize },
    /// All present observations had zero quantity, so no weighted mean exists.
    ZeroQuantity,
}

/// A per-day diagnostic emitted by [`weighted_daily_average`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationWarning {
    pub date: NaiveDate,
    pub reason: WarningReason,
}

impl std::fmt::Display for AggregationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.reason {
            WarningReason::TooFewHours { present, required } => write!(
                f,
                "{}: only {present} of the required {required} hourly observations present",
                self.date
            ),
            WarningReason::ZeroQuantity => {
                write!(f, "{}: total traded quantity is zero", self.date)
            }
        }
    }
}

/// A contiguous daily series with an explicit missing mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    start: NaiveDate,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl DailySeries {
    /// Builds a series from raw values; non-finite entries are treated as
    /// missing.
    pub fn new(start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("daily series must not be empty"));
        }
        let missing: Vec<bool> = values.iter().map(|v| !v.is_finite()).collect();
        let values = values
            .into_iter()
            .map(|v| if v.is_finite() { v } else { f64::NAN })
            .collect();
        Ok(DailySeries {
            start,
            values,
            missing,
        })
    }

    /// Builds a series with an explicit mask. Present entries must be finite;
    /// the stored value at missing positions is normalized to `NaN`.
    pub fn with_missing(start: NaiveDate, values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("daily series must not be empty"));
        }
        if values.len() != missing.len() {
            return Err(Error::invalid(format!(
                "values ({}) and missing mask ({}) lengths differ",
                values.len(),
                missing.len()
            )));
        }
        let mut vals = values;
        for (i, (v, m)) in vals.iter_mut().zip(&missing).enumerate() {
            if *m {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite value at present position {i}"
                )));
            }
        }
        Ok(DailySeries {
            start,
            values: vals,
            missing,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start + Duration::days(self.values.len() as i64 - 1)
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }

    /// Index of `date` within the span, if covered.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        if offset < 0 || offset as usize >= self.values.len() {
            None
        } else {
            Some(offset as usize)
        }
    }

    /// The value at `index`, or `None` when missing.
    pub fn value(&self, index: usize) -> Option<f64> {
        if self.missing[index] {
            None
        } else {
            Some(self.values[index])
        }
    }

    /// Raw value storage; missing positions hold `NaN`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.missing[index]
    }

    pub fn is_complete(&self) -> bool {
        self.missing.iter().all(|m| !m)
    }

    pub fn n_present(&self) -> usize {
        self.missing.iter().filter(|m| !**m).count()
    }

    /// Copies out the values, erroring if any position is missing.
    pub fn to_complete_vec(&self) -> Result<Vec<f64>> {
        if let Some(first) = self.missing.iter().position(|m| *m) {
            let n_missing = self.len() - self.n_present();
            return Err(Error::invalid(format!(
                "series has {n_missing} missing day(s), first at {}",
                self.date_at(first)
            )));
        }
        Ok(self.values.clone())
    }

    /// A sub-series of `len` days starting at day `offset`.
    pub fn slice(&self, offset: usize, len: usize) -> Result<DailySeries> {
        if len == 0 || offset + len > self.values.len() {
            return Err(Error::invalid(format!(
                "slice {offset}..{} out of bounds for series of length {}",
                offset + len,
                self.values.len()
            )));
        }
        Ok(DailySeries {
            start: self.date_at(offset),
            values: self.values[offset..offset + len].to_vec(),
            missing: self.missing[offset..offset + len].to_vec(),
        })
    }
}

/// Collapses an hourly panel into a daily quantity-weighted average price.
///
/// A day is kept when at least `min_hours` hourly observations are present
/// and their total quantity is positive; otherwise the day is marked missing
/// and a warning records why. The weighted mean is invariant under rescaling
/// all quantities of a day by a common positive factor.
pub fn weighted_daily_average(
    panel: &HourlyPanel,
    min_hours: usize,
) -> Result<(DailySeries, Vec<AggregationWarning>)> {
    if min_hours > 24 {
        return Err(Error::invalid(format!(
            "min_hours {min_hours} exceeds the 24 hours of a day"
        )));
    }
    let n = panel.n_days();
    let mut values = vec![f64::NAN; n];
    let mut missing = vec![true; n];
    let mut warnings = Vec::new();
    for d in 0..n {
        let date = panel.start + Duration::days(d as i64);
        let mut present = 0usize;
        let mut num = 0.0;
        let mut den = 0.0;
        for obs in panel.days[d].iter().flatten() {
            if obs.quantity < 0.0 {
                return Err(Error::invalid(format!("negative quantity on {date}")));
            }
            present += 1;
            num += obs.price * obs.quantity;
            den += obs.quantity;
        }
        if present < min_hours {
            warnings.push(AggregationWarning {
                date,
                reason: WarningReason::TooFewHours {
                    present,
                    required: min_hours,
                },
            });
            continue;
        }
        if den == 0.0 {
            warnings.push(AggregationWarning {
                date,
                reason: WarningReason::ZeroQuantity,
            });
            continue;
        }
        values[d] = num / den;
        missing[d] = false;
    }
    let series = DailySeries::with_missing(panel.start, values, missing)?;
    Ok((series, warnings))
}

/// Trailing sample variance over windows of `window` consecutive days.
///
/// The output shares the input span. Position `t` holds the sample variance
/// (divisor `window - 1`) of days `t - window + 1 ..= t`; the first
/// `window - 1` positions are missing, as is any position whose window
/// contains a missing day.
pub fn rolling_variance(series: &DailySeries, window: usize) -> Result<DailySeries> {
    let n = series.len();
    if window < 2 {
        return Err(Error::invalid(format!(
            "rolling variance window must be at least 2, got {window}"
        )));
    }
    if window > n {
        return Err(Error::invalid(format!(
            "rolling variance window {window} exceeds series length {n}"
        )));
    }
    let mut values = vec![f64::NAN; n];
    let mut missing = vec![true; n];
    for t in (window - 1)..n {
        let lo = t + 1 - window;
        if series.missing[lo..=t].iter().any(|m| *m) {
            continue;
        }
        let slice = &series.values[lo..=t];
        let mean = slice.iter().sum::<f64>() / window as f64;
        let ss: f64 = slice.iter().map(|v| (v - mean) * (v - mean)).sum();
        values[t] = ss / (window - 1) as f64;
        missing[t] = false;
    }
    DailySeries::with_missing(series.start, values, missing)
}

/// Sample autocorrelation function at lags `0..=max_lag`.
///
/// Uses the overall-mean estimator with autocovariance divisor `n`, so the
/// result is invariant under affine transformations of the data and bounded
/// by one in absolute value. The series must be complete and have positive
/// sample variance.
pub fn acf(series: &DailySeries, max_lag: usize) -> Result<Vec<f64>> {
    let x = series.to_complete_vec()?;
    let n = x.len();
    if max_lag == 0 {
        return Err(Error::invalid("max_lag must be at least 1"));
    }
    if max_lag >= n {
        return Err(Error::invalid(format!(
            "max_lag {max_lag} must be smaller than series length {n}"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = dev.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if c0 <= f64::EPSILON * f64::EPSILON * (1.0 + mean * mean) {
        return Err(Error::invalid(
            "autocorrelation undefined for a series with zero sample variance",
        ));
    }
    let mut rho = Vec::with_capacity(max_lag + 1);
    rho.push(1.0);
    for k in 1..=max_lag {
        let ck = dev[..n - k]
            .iter()
            .zip(&dev[k..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        rho.push(ck / c0);
    }
    Ok(rho)
}

/// Restricts two series to their common date span with a unified missing
/// mask: a day is present in both outputs only when present in both inputs.
pub fn align_series(a: &DailySeries, b: &DailySeries) -> Result<(DailySeries, DailySeries)> {
    let start = a.start.max(b.start);
    let end = a.end_date().min(b.end_date());
    if start > end {
        return Err(Error::invalid(format!(
            "series spans {}..={} and {}..={} do not overlap",
            a.start,
            a.end_date(),
            b.start,
            b.end_date()
        )));
    }
    let len = (end - start).num_days() as usize + 1;
    let oa = a.index_of(start).expect("start within a");
    let ob = b.index_of(start).expect("start within b");
    let mut va = Vec::with_capacity(len);
    let mut vb = Vec::with_capacity(len);
    let mut missing = Vec::with_capacity(len);
    for i in 0..len {
        let m = a.missing[oa + i] || b.missing[ob + i];
        missing.push(m);
        va.push(a.values[oa + i]);
        vb.push(b.values[ob + i]);
    }
    Ok((
        DailySeries::with_missing(start, va, missing.clone())?,
        DailySeries::with_missing(start, vb, missing)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::Distribution;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn fill_day(panel: &mut HourlyPanel, date: NaiveDate, prices: &[f64], quantities: &[f64]) {
        for (h, (&p, &q)) in prices.iter().zip(quantities).enumerate() {
            panel
                .set(
                    date,
                    (h + 1) as u8,
                    HourObs {
                        price: p,
                        quantity: q,
                    },
                )
                .unwrap();
        }
    }

    #[test]
    fn weighted_average_two_hours() {
        let mut panel = HourlyPanel::new(d(2015, 1, 1), 1).unwrap();
        fill_day(&mut panel, d(2015, 1, 1), &[10.0, 30.0], &[1.0, 3.0]);
        let (series, warnings) = weighted_daily_average(&panel, 2).unwrap();
        assert_eq!(series.value(0), Some(25.0));
        assert!(warnings.is_empty());
    }

    #[test]
    fn weighted_average_ignores_quantities_when_prices_equal() {
        let mut panel = HourlyPanel::new(d(2015, 1, 1), 1).unwrap();
        let prices = [42.0; 24];
        let quantities: Vec<f64> = (1..=24).map(|h| h as f64 * 13.5).collect();
        fill_day(&mut panel, d(2015, 1, 1), &prices, &quantities);
        let (series, _) = weighted_daily_average(&panel, 24).unwrap();
        assert_abs_diff_eq!(series.value(0).unwrap(), 42.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_average_quantity_rescale_exact_for_power_of_two() {
        let mut a = HourlyPanel::new(d(2015, 1, 1), 1).unwrap();
        let mut b = HourlyPanel::new(d(2015, 1, 1), 1).unwrap();
        let prices = [31.7, 45.2, 12.9, 77.3];
        let quantities = [120.0, 340.5, 17.25, 98.0];
        fill_day(&mut a, d(2015, 1, 1), &prices, &quantities);
        let doubled: Vec<f64> = quantities.iter().map(|q| q * 2.0).collect();
        fill_day(&mut b, d(2015, 1, 1), &prices, &doubled);
        let (sa, _) = weighted_daily_average(&a, 4).unwrap();
        let (sb, _) = weighted_daily_average(&b, 4).unwrap();
        assert_eq!(sa.value(0), sb.value(0));
    }

    #[test]
    fn weighted_average_zero_quantity_day_is_missing_with_warning() {
        let mut panel = HourlyPanel::new(d(2015, 1, 1), 2).unwrap();
        fill_day(&mut panel, d(2015, 1, 1), &[50.0, 60.0], &[0.0, 0.0]);
        fill_day(&mut panel, d(2015, 1, 2), &[50.0, 60.0], &[1.0, 1.0]);
        let (series, warnings) = weighted_daily_average(&panel, 2).unwrap();
        assert_eq!(series.value(0), None);
        assert_eq!(series.value(1), Some(55.0));
        assert_eq!(
            warnings,
            vec![AggregationWarning {
                date: d(2015, 1, 1),
                reason: WarningReason::ZeroQuantity,
            }]
        );
    }

    #[test]
    fn weighted_average_enforces_min_hours() {
        let mut panel = HourlyPanel::new(d(2015, 1, 1), 1).unwrap();
        fill_day(&mut panel, d(2015, 1, 1), &[50.0; 19], &[1.0; 19]);
        let (series, warnings) = weighted_daily_average(&panel, 20).unwrap();
        assert_eq!(series.value(0), None);
        assert_eq!(
            warnings[0].reason,
            WarningReason::TooFewHours {
                present: 19,
                required: 20
            }
        );
    }

    #[test]
    fn panel_rejects_negative_quantity_and_bad_hour() {
        let mut panel = HourlyPanel::new(d(2015, 1, 1), 1).unwrap();
        let obs = HourObs {
            price: 10.0,
            quantity: -1.0,
        };
        assert!(panel.set(d(2015, 1, 1), 1, obs).is_err());
        let ok = HourObs {
            price: 10.0,
            quantity: 1.0,
        };
        assert!(panel.set(d(2015, 1, 1), 0, ok).is_err());
        assert!(panel.set(d(2015, 1, 1), 25, ok).is_err());
        panel.set(d(2015, 1, 1), 5, ok).unwrap();
        assert!(panel.set(d(2015, 1, 1), 5, ok).is_err());
    }

    #[test]
    fn rolling_variance_constant_series_is_zero() {
        let series = DailySeries::new(d(2015, 1, 1), vec![7.5; 10]).unwrap();
        let rv = rolling_variance(&series, 3).unwrap();
        assert_eq!(rv.value(0), None);
        assert_eq!(rv.value(1), None);
        for t in 2..10 {
            assert_eq!(rv.value(t), Some(0.0));
        }
    }

    #[test]
    fn rolling_variance_window_two_hand_case() {
        let series = DailySeries::new(d(2015, 1, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let rv = rolling_variance(&series, 2).unwrap();
        assert_eq!(rv.value(0), None);
        for t in 1..4 {
            assert_abs_diff_eq!(rv.value(t).unwrap(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn rolling_variance_alternating_window_thirty() {
        let values: Vec<f64> = (0..30).map(|t| if t % 2 == 0 { 0.0 } else { 10.0 }).collect();
        let series = DailySeries::new(d(2015, 1, 1), values).unwrap();
        let rv = rolling_variance(&series, 30).unwrap();
        assert_abs_diff_eq!(rv.value(29).unwrap(), 750.0 / 29.0, epsilon = 1e-12);
    }

    #[test]
    fn rolling_variance_propagates_missing() {
        let mut values = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        values[2] = f64::NAN;
        let series = DailySeries::new(d(2015, 1, 1), values).unwrap();
        let rv = rolling_variance(&series, 2).unwrap();
        assert_eq!(rv.value(1), Some(0.5));
        assert_eq!(rv.value(2), None);
        assert_eq!(rv.value(3), None);
        assert_eq!(rv.value(4), Some(0.5));
    }

    #[test]
    fn rolling_variance_rejects_bad_windows() {
        let series = DailySeries::new(d(2015, 1, 1), vec![1.0, 2.0, 3.0]).unwrap();
        assert!(rolling_variance(&series, 1).is_err());
        assert!(rolling_variance(&series, 4).is_err());
    }

    #[test]
    fn acf_lag_zero_is_one_and_weekly_cycle_peaks_at_seven() {
        let values: Vec<f64> = (0..700)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin())
            .collect();
        let series = DailySeries::new(d(2015, 1, 1), values).unwrap();
        let rho = acf(&series, 10).unwrap();
        assert_eq!(rho[0], 1.0);
        for k in 1..7 {
            assert!(rho[7] > rho[k], "lag 7 should dominate lag {k}");
        }
        assert!(rho[7] > 0.95);
    }

    #[test]
    fn acf_affine_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = rand_distr::StandardNormal;
        let x: Vec<f64> = (0..400)
            .map(|t| {
                let z: f64 = normal.sample(&mut rng);
                (t as f64 * 0.01).sin() + z
            })
            .collect();
        let shifted: Vec<f64> = x.iter().map(|v| -3.0 * v + 100.0).collect();
        let sa = DailySeries::new(d(2015, 1, 1), x).unwrap();
        let sb = DailySeries::new(d(2015, 1, 1), shifted).unwrap();
        let ra = acf(&sa, 20).unwrap();
        let rb = acf(&sb, 20).unwrap();
        for (a, b) in ra.iter().zip(&rb) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn acf_white_noise_is_small_at_all_lags() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let normal = rand_distr::StandardNormal;
        let x: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
        let series = DailySeries::new(d(2015, 1, 1), x).unwrap();
        let rho = acf(&series, 30).unwrap();
        let max = rho[1..].iter().fold(0.0f64, |m, r| m.max(r.abs()));
        assert!(max < 0.08, "white noise acf too large: {max}");
    }

    #[test]
    fn acf_rejects_constant_and_incomplete_series() {
        let series = DailySeries::new(d(2015, 1, 1), vec![5.0; 50]).unwrap();
        assert!(acf(&series, 5).is_err());
        let gappy =
            DailySeries::new(d(2015, 1, 1), vec![1.0, f64::NAN, 3.0, 4.0, 5.0]).unwrap();
        assert!(acf(&gappy, 2).is_err());
        let short = DailySeries::new(d(2015, 1, 1), vec![1.0, 2.0]).unwrap();
        assert!(acf(&short, 2).is_err());
    }

    #[test]
    fn align_intersects_spans_and_unifies_masks() {
        let a = DailySeries::new(d(2015, 1, 1), vec![1.0, 2.0, f64::NAN, 4.0, 5.0]).unwrap();
        let b = DailySeries::new(d(2015, 1, 3), vec![30.0, 40.0, 50.0, 60.0]).unwrap();
        let (aa, ba) = align_series(&a, &b).unwrap();
        assert_eq!(aa.start_date(), d(2015, 1, 3));
        assert_eq!(aa.len(), 3);
        assert_eq!(ba.len(), 3);
        assert_eq!(aa.value(0), None);
        assert_eq!(ba.value(0), None);
        assert_eq!(aa.value(1), Some(4.0));
        assert_eq!(ba.value(1), Some(40.0));
    }

    #[test]
    fn align_rejects_disjoint_spans() {
        let a = DailySeries::new(d(2015, 1, 1), vec![1.0, 2.0]).unwrap();
        let b = DailySeries::new(d(2015, 2, 1), vec![1.0, 2.0]).unwrap();
        assert!(align_series(&a, &b).is_err());
    }

    #[test]
    fn daily_series_basics() {
        let s = DailySeries::new(d(2015, 12, 30), vec![1.0, f64::INFINITY, 3.0]).unwrap();
        assert_eq!(s.end_date(), d(2016, 1, 1));
        assert_eq!(s.index_of(d(2016, 1, 1)), Some(2));
        assert_eq!(s.index_of(d(2016, 1, 2)), None);
        assert_eq!(s.date_at(1), d(2015, 12, 31));
        assert!(s.is_missing(1));
        assert_eq!(s.n_present(), 2);
        assert!(s.to_complete_vec().is_err());
        let sliced = s.slice(2, 1).unwrap();
        assert_eq!(sliced.start_date(), d(2016, 1, 1));
        assert_eq!(sliced.value(0), Some(3.0));
        assert!(s.slice(2, 2).is_err());
        assert!(DailySeries::new(d(2015, 1, 1), vec![]).is_err());
        assert!(DailySeries::with_missing(
            d(2015, 1, 1),
            vec![f64::NAN, 1.0],
            vec![false, false]
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_rolling_variance_shift_invariant(
            values in prop::collection::vec(-50.0f64..50.0, 5..40),
            shift in -1000.0f64..1000.0,
        ) {
            let base = DailySeries::new(d(2015, 1, 1), values.clone()).unwrap();
            let shifted = DailySeries::new(
                d(2015, 1, 1),
                values.iter().map(|v| v + shift).collect(),
            ).unwrap();
            let ra = rolling_variance(&base, 3).unwrap();
            let rb = rolling_variance(&shifted, 3).unwrap();
            for t in 2..values.len() {
                let (va, vb) = (ra.value(t).unwrap(), rb.value(t).unwrap());
                prop_assert!(va >= 0.0);
                prop_assert!((va - vb).abs() <= 1e-8 * (1.0 + va.abs()));
            }
        }

        #[test]
        fn prop_acf_bounded_by_one(
            values in prop::collection::vec(-100.0f64..100.0, 10..60),
        ) {
            let series = DailySeries::new(d(2015, 1, 1), values).unwrap();
            match acf(&series, 5) {
                Ok(rho) => {
                    for r in &rho {
                        prop_assert!(r.abs() <= 1.0 + 1e-9);
                    }
                }
                Err(_) => {
                    // Constant draws are legitimately rejected.
                }
            }
        }

        #[test]
        fn prop_weighted_average_within_price_range(
            prices in prop::collection::vec(1.0f64..200.0, 1..24),
            quantities in prop::collection::vec(0.01f64..1e4, 24),
        ) {
            let mut panel = HourlyPanel::new(d(2015, 1, 1), 1).unwrap();
            fill_day(&mut panel, d(2015, 1, 1), &prices, &quantities[..prices.len()]);
            let (series, _) = weighted_daily_average(&panel, 1).unwrap();
            let v = series.value(0).unwrap();
            let lo = prices.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = prices.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }
}
