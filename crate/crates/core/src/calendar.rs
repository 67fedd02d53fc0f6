//! Calendar covariates for the additive models: linear trend, day-of-year,
//! day-of-week, and a bank-holiday dummy.
//!
//! Day-of-year is coded 1..=365 in every year. In leap years February 29
//! shares code 59 with February 28, so March 1 is always 60 and December 31
//! is always 365; this keeps the annual cycle aligned across years without a
//! 366th code that would appear once every four years. Day-of-week follows
//! the ISO convention, Monday = 1 through Sunday = 7.

use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate};

use crate::error::{Error, Result};

/// Deterministic calendar covariates over a contiguous daily span.
#[derive(Debug, Clone, PartialEq)]
pub struct CalendarDesign {
    start: NaiveDate,
    /// Day counter, 1-based and increasing by one per day.
    pub trend: Vec<f64>,
    /// Day-of-year code in 1..=365 (leap-day rule above).
    pub dayyear: Vec<f64>,
    /// Day-of-week code in 1..=7, Monday = 1.
    pub dayweek: Vec<f64>,
    /// Bank-holiday dummy, 1.0 on configured holidays and 0.0 otherwise.
    pub bank: Vec<f64>,
}

/// Day-of-year code of `date` under the shared-leap-day convention.
pub fn day_of_year_code(date: NaiveDate) -> u32 {
    let ord = date.ordinal();
    if date.leap_year() && ord >= 60 {
        ord - 1
    } else {
        ord
    }
}

/// ISO day-of-week code of `date`, Monday = 1 through Sunday = 7.
pub fn day_of_week_code(date: NaiveDate) -> u32 {
    date.weekday().number_from_monday()
}

/// Builds covariates for `n_days` days starting at `start`.
pub fn build_calendar(
    start: NaiveDate,
    n_days: usize,
    holidays: &BTreeSet<NaiveDate>,
) -> Result<CalendarDesign> {
    if n_days == 0 {
        return Err(Error::invalid("calendar span must cover at least one day"));
    }
    let mut trend = Vec::with_capacity(n_days);
    let mut dayyear = Vec::with_capacity(n_days);
    let mut dayweek = Vec::with_capacity(n_days);
    let mut bank = Vec::with_capacity(n_days);
    for t in 0..n_days {
        let date = start + Duration::days(t as i64);
        trend.push((t + 1) as f64);
        dayyear.push(day_of_year_code(date) as f64);
        dayweek.push(day_of_week_code(date) as f64);
        bank.push(if holidays.contains(&date) { 1.0 } else { 0.0 });
    }
    Ok(CalendarDesign {
        start,
        trend,
        dayyear,
        dayweek,
        bank,
    })
}

/// Fixed-date Italian public holidays between `start` and `end` inclusive:
/// New Year, Epiphany, Liberation Day, Labour Day, Republic Day, Assumption,
/// All Saints, Immaculate Conception, Christmas, and St. Stephen.
///
/// Easter-linked holidays move from year to year and are not generated; pass
/// a full externally sourced calendar when those matter.
pub fn fixed_date_holidays(start: NaiveDate, end: NaiveDate) -> BTreeSet<NaiveDate> {
    const FIXED: [(u32, u32); 10] = [
        (1, 1),
        (1, 6),
        (4, 25),
        (5, 1),
        (6, 2),
        (8, 15),
        (11, 1),
        (12, 8),
        (12, 25),
        (12, 26),
    ];
    let mut out = BTreeSet::new();
    for year in start.year()..=end.year() {
        for (month, day) in FIXED {
            if let Some(date) = NaiveDate::from_ymd_opt(year, month, day) {
                if date >= start && date <= end {
                    out.insert(date);
                }
            }
        }
    }
    out
}

impl CalendarDesign {
    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start + Duration::days(self.trend.len() as i64 - 1)
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }

    /// A sub-design of `len` days starting at day `offset`.
    ///
    /// The trend values of the parent are kept, so a slice stays aligned with
    /// the original day counter rather than restarting at one.
    pub fn slice(&self, offset: usize, len: usize) -> Result<CalendarDesign> {
        if len == 0 || offset + len > self.trend.len() {
            return Err(Error::invalid(format!(
                "slice {offset}..{} out of bounds for calendar of length {}",
                offset + len,
                self.trend.len()
            )));
        }
        Ok(CalendarDesign {
            start: self.date_at(offset),
            trend: self.trend[offset..offset + len].to_vec(),
            dayyear: self.dayyear[offset..offset + len].to_vec(),
            dayweek: self.dayweek[offset..offset + len].to_vec(),
            bank: self.bank[offset..offset + len].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn trend_counts_from_one() {
        let cal = build_calendar(d(2015, 1, 1), 5, &BTreeSet::new()).unwrap();
        assert_eq!(cal.trend, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn dayweek_matches_known_weekdays() {
        // 2015-01-01 was a Thursday.
        let cal = build_calendar(d(2015, 1, 1), 7, &BTreeSet::new()).unwrap();
        assert_eq!(cal.dayweek, vec![4.0, 5.0, 6.0, 7.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn dayyear_is_identity_in_common_years() {
        assert_eq!(day_of_year_code(d(2015, 1, 1)), 1);
        assert_eq!(day_of_year_code(d(2015, 2, 28)), 59);
        assert_eq!(day_of_year_code(d(2015, 3, 1)), 60);
        assert_eq!(day_of_year_code(d(2015, 12, 31)), 365);
    }

    #[test]
    fn leap_day_shares_code_with_february_28() {
        assert_eq!(day_of_year_code(d(2016, 2, 28)), 59);
        assert_eq!(day_of_year_code(d(2016, 2, 29)), 59);
        assert_eq!(day_of_year_code(d(2016, 3, 1)), 60);
        assert_eq!(day_of_year_code(d(2016, 12, 31)), 365);
    }

    #[test]
    fn dayyear_wraps_at_new_year() {
        let cal = build_calendar(d(2015, 12, 30), 3, &BTreeSet::new()).unwrap();
        assert_eq!(cal.dayyear, vec![364.0, 365.0, 1.0]);
    }

    #[test]
    fn dayyear_stays_in_domain_across_leap_year() {
        let cal = build_calendar(d(2016, 1, 1), 366, &BTreeSet::new()).unwrap();
        for v in &cal.dayyear {
            assert!((1.0..=365.0).contains(v));
        }
        assert_eq!(cal.dayyear[365], 365.0);
    }

    #[test]
    fn bank_flags_configured_holidays() {
        let holidays: BTreeSet<NaiveDate> = [d(2015, 1, 1), d(2015, 1, 6)].into_iter().collect();
        let cal = build_calendar(d(2015, 1, 1), 7, &holidays).unwrap();
        assert_eq!(cal.bank, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn fixed_holidays_cover_the_known_dates() {
        let hol = fixed_date_holidays(d(2015, 1, 1), d(2016, 12, 31));
        assert_eq!(hol.len(), 20);
        assert!(hol.contains(&d(2015, 1, 1)));
        assert!(hol.contains(&d(2015, 8, 15)));
        assert!(hol.contains(&d(2016, 12, 26)));
        assert!(!hol.contains(&d(2015, 3, 3)));
        // Partial years only yield the dates inside the window.
        let tail = fixed_date_holidays(d(2015, 11, 15), d(2015, 12, 31));
        assert_eq!(tail.len(), 3);
    }

    #[test]
    fn slice_keeps_parent_trend_values() {
        let cal = build_calendar(d(2015, 1, 1), 10, &BTreeSet::new()).unwrap();
        let sub = cal.slice(7, 3).unwrap();
        assert_eq!(sub.start_date(), d(2015, 1, 8));
        assert_eq!(sub.trend, vec![8.0, 9.0, 10.0]);
        assert!(cal.slice(8, 3).is_err());
    }
}
