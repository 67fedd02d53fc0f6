//! Reading and writing the canonical CSV formats: hourly market prices,
//! daily series, and holiday calendars.
//!
//! Hourly price files carry the header `date,hour,zone,price_eur_mwh,
//! quantity_mwh` with hours numbered 1..=24; daily files carry `date,value`
//! with one row per consecutive calendar day, an empty value marking a
//! missing day. Holiday files hold one ISO date per line with `#` starting
//! a comment. Emitted files use UTF-8, LF line endings, and `.` decimals.
//!
//! Readers report violations as [`Error::Schema`] with the path, row, and
//! column, so a malformed file points at itself.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::series::{DailySeries, HourObs, HourlyPanel};

/// One parsed row of an hourly price file.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyRow {
    pub date: NaiveDate,
    /// Market hour, 1..=24.
    pub hour: u8,
    pub zone: String,
    pub price_eur_mwh: f64,
    pub quantity_mwh: f64,
}

const HOURLY_HEADER: [&str; 5] = ["date", "hour", "zone", "price_eur_mwh", "quantity_mwh"];
const DAILY_HEADER: [&str; 2] = ["date", "value"];

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn schema_err(path: &Path, row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.display().to_string(),
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

fn check_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(schema_err(
            path,
            1,
            "header",
            format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

fn record_row(record: &csv::StringRecord, fallback: usize) -> usize {
    record
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback)
}

fn parse_date(path: &Path, row: usize, column: &str, field: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(field.trim(), "%Y-%m-%d")
        .map_err(|_| schema_err(path, row, column, format!("`{field}` is not an ISO date")))
}

fn parse_f64(path: &Path, row: usize, column: &str, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| schema_err(path, row, column, format!("`{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(schema_err(path, row, column, format!("`{field}` is not finite")));
    }
    Ok(v)
}

/// Reads an hourly price file into rows, validating the schema but not the
/// panel structure (duplicates and coverage are checked when a zone's rows
/// are assembled by [`panel_from_rows`]).
pub fn read_hourly_csv(path: &Path) -> Result<Vec<HourlyRow>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    check_header(path, reader.headers().map_err(|e| csv_err(path, e))?, &HOURLY_HEADER)?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let row = record_row(&record, i + 2);
        if record.len() != HOURLY_HEADER.len() {
            return Err(schema_err(
                path,
                row,
                "record",
                format!("expected {} fields, found {}", HOURLY_HEADER.len(), record.len()),
            ));
        }
        let date = parse_date(path, row, "date", &record[0])?;
        let hour: u8 = record[1]
            .trim()
            .parse()
            .ok()
            .filter(|h| (1..=24).contains(h))
            .ok_or_else(|| {
                schema_err(path, row, "hour", format!("`{}` is not an hour in 1..=24", &record[1]))
            })?;
        let zone = record[2].trim();
        if zone.is_empty() {
            return Err(schema_err(path, row, "zone", "zone identifier is empty"));
        }
        let price = parse_f64(path, row, "price_eur_mwh", &record[3])?;
        let quantity = parse_f64(path, row, "quantity_mwh", &record[4])?;
        if quantity < 0.0 {
            return Err(schema_err(
                path,
                row,
                "quantity_mwh",
                format!("quantity {quantity} is negative"),
            ));
        }
        rows.push(HourlyRow {
            date,
            hour,
            zone: zone.to_string(),
            price_eur_mwh: price,
            quantity_mwh: quantity,
        });
    }
    Ok(rows)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let row = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(0);
    schema_err(path, row, "record", e.to_string())
}

/// Assembles one zone's rows into an hourly panel spanning exactly the rows'
/// date range. Duplicate (date, hour) cells are rejected.
pub fn panel_from_rows(rows: &[HourlyRow], zone: &str) -> Result<HourlyPanel> {
    let mut first: Option<NaiveDate> = None;
    let mut last: Option<NaiveDate> = None;
    for r in rows.iter().filter(|r| r.zone == zone) {
        first = Some(first.map_or(r.date, |d| d.min(r.date)));
        last = Some(last.map_or(r.date, |d| d.max(r.date)));
    }
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::invalid(format!("no hourly rows for zone {zone}")));
    };
    let n_days = (last - first).num_days() as usize + 1;
    let mut panel = HourlyPanel::new(first, n_days)?;
    for r in rows.iter().filter(|r| r.zone == zone) {
        panel.set(
            r.date,
            r.hour,
            HourObs {
                price: r.price_eur_mwh,
                quantity: r.quantity_mwh,
            },
        )?;
    }
    Ok(panel)
}

/// Distinct zone identifiers present in a set of hourly rows, sorted.
pub fn zones_in_rows(rows: &[HourlyRow]) -> Vec<String> {
    let set: BTreeSet<&str> = rows.iter().map(|r| r.zone.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// Writes hourly rows in the canonical schema.
pub fn write_hourly_csv(path: &Path, rows: &[HourlyRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(HOURLY_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&[
            r.date.to_string(),
            r.hour.to_string(),
            r.zone.clone(),
            format_value(r.price_eur_mwh),
            format_value(r.quantity_mwh),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a `date,value` file into a daily series.
///
/// Rows must cover consecutive calendar days; an empty value field marks the
/// day as missing.
pub fn read_daily_csv(path: &Path) -> Result<DailySeries> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    check_header(path, reader.headers().map_err(|e| csv_err(path, e))?, &DAILY_HEADER)?;

    let mut start: Option<NaiveDate> = None;
    let mut expected: Option<NaiveDate> = None;
    let mut values = Vec::new();
    let mut missing = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let row = record_row(&record, i + 2);
        if record.len() != DAILY_HEADER.len() {
            return Err(schema_err(
                path,
                row,
                "record",
                format!("expected {} fields, found {}", DAILY_HEADER.len(), record.len()),
            ));
        }
        let date = parse_date(path, row, "date", &record[0])?;
        if let Some(e) = expected {
            if date != e {
                return Err(schema_err(
                    path,
                    row,
                    "date",
                    format!("expected consecutive day {e}, found {date}"),
                ));
            }
        } else {
            start = Some(date);
        }
        expected = date.succ_opt();
        let field = record[1].trim();
        if field.is_empty() {
            values.push(f64::NAN);
            missing.push(true);
        } else {
            values.push(parse_f64(path, row, "value", field)?);
            missing.push(false);
        }
    }
    let start = start.ok_or_else(|| schema_err(path, 1, "record", "file has no data rows"))?;
    DailySeries::with_missing(start, values, missing)
}

/// Writes a daily series as `date,value`, missing days as empty values.
pub fn write_daily_csv(path: &Path, series: &DailySeries) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(DAILY_HEADER).map_err(|e| csv_err(path, e))?;
    for i in 0..series.len() {
        let value = match series.value(i) {
            Some(v) => format_value(v),
            None => String::new(),
        };
        w.write_record(&[series.date_at(i).to_string(), value])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a holiday file: one ISO date per line, `#` comments, blank lines
/// ignored.
pub fn read_holidays(path: &Path) -> Result<BTreeSet<NaiveDate>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        out.insert(parse_date(path, i + 1, "date", text)?);
    }
    Ok(out)
}

/// Writes a holiday file, one date per line.
pub fn write_holidays(path: &Path, holidays: &BTreeSet<NaiveDate>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for d in holidays {
        writeln!(w, "{d}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Shortest decimal representation that parses back to the same value.
fn format_value(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn write(path: &Path, text: &str) {
        std::fs::write(path, text).unwrap();
    }

    #[test]
    fn hourly_roundtrip_preserves_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("hourly.csv");
        let rows: Vec<HourlyRow> = (1..=24)
            .map(|h| HourlyRow {
                date: d(2015, 3, 1),
                hour: h,
                zone: "SICI".to_string(),
                price_eur_mwh: 40.0 + h as f64 * 0.25,
                quantity_mwh: 100.0 + h as f64,
            })
            .collect();
        write_hourly_csv(&path, &rows).unwrap();
        let back = read_hourly_csv(&path).unwrap();
        assert_eq!(back, rows);
        assert_eq!(zones_in_rows(&back), vec!["SICI".to_string()]);
    }

    #[test]
    fn hourly_schema_violations_carry_row_and_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");

        write(&path, "date,hour,zone,price\n");
        let err = read_hourly_csv(&path).unwrap_err();
        assert!(matches!(err, Error::Schema { row: 1, .. }), "{err}");

        write(
            &path,
            "date,hour,zone,price_eur_mwh,quantity_mwh\n2015-01-01,25,SICI,50,100\n",
        );
        match read_hourly_csv(&path).unwrap_err() {
            Error::Schema { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "hour");
            }
            other => panic!("expected schema error, got {other}"),
        }

        write(
            &path,
            "date,hour,zone,price_eur_mwh,quantity_mwh\n2015-01-01,1,SICI,50,100\n2015-01-01,2,SICI,abc,100\n",
        );
        match read_hourly_csv(&path).unwrap_err() {
            Error::Schema { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "price_eur_mwh");
            }
            other => panic!("expected schema error, got {other}"),
        }

        write(
            &path,
            "date,hour,zone,price_eur_mwh,quantity_mwh\n2015-01-01,1,SICI,50,-3\n",
        );
        match read_hourly_csv(&path).unwrap_err() {
            Error::Schema { column, .. } => assert_eq!(column, "quantity_mwh"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn panel_assembly_filters_by_zone_and_rejects_duplicates() {
        let mk = |date, hour, zone: &str| HourlyRow {
            date,
            hour,
            zone: zone.to_string(),
            price_eur_mwh: 50.0,
            quantity_mwh: 1.0,
        };
        let rows = vec![
            mk(d(2015, 1, 1), 1, "SICI"),
            mk(d(2015, 1, 3), 2, "SICI"),
            mk(d(2015, 1, 2), 5, "NORD"),
        ];
        let panel = panel_from_rows(&rows, "SICI").unwrap();
        assert_eq!(panel.start_date(), d(2015, 1, 1));
        assert_eq!(panel.n_days(), 3);
        assert!(panel.day(0)[0].is_some());
        assert!(panel.day(1).iter().all(Option::is_none));

        let dup = vec![mk(d(2015, 1, 1), 1, "SICI"), mk(d(2015, 1, 1), 1, "SICI")];
        assert!(panel_from_rows(&dup, "SICI").is_err());
        assert!(panel_from_rows(&rows, "SARD").is_err());
    }

    #[test]
    fn daily_roundtrip_preserves_values_and_missing_days() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("daily.csv");
        let series = DailySeries::with_missing(
            d(2016, 2, 28),
            vec![41.25, f64::NAN, 39.0625],
            vec![false, true, false],
        )
        .unwrap();
        write_daily_csv(&path, &series).unwrap();
        let back = read_daily_csv(&path).unwrap();
        assert_eq!(back.start_date(), series.start_date());
        assert_eq!(back.missing_mask(), series.missing_mask());
        assert_eq!(back.value(0), Some(41.25));
        assert_eq!(back.value(2), Some(39.0625));

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "date,value\n2016-02-28,41.25\n2016-02-29,\n2016-03-01,39.0625\n"
        );
    }

    #[test]
    fn daily_reader_rejects_date_gaps() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("gap.csv");
        write(&path, "date,value\n2015-01-01,1\n2015-01-03,2\n");
        match read_daily_csv(&path).unwrap_err() {
            Error::Schema { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "date");
            }
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn holiday_file_supports_comments_and_blank_lines() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("holidays.txt");
        write(
            &path,
            "# national holidays\n2015-01-01\n\n2015-12-25 # Christmas\n",
        );
        let set = read_holidays(&path).unwrap();
        assert_eq!(
            set.into_iter().collect::<Vec<_>>(),
            vec![d(2015, 1, 1), d(2015, 12, 25)]
        );

        write(&path, "2015-13-40\n");
        assert!(matches!(
            read_holidays(&path).unwrap_err(),
            Error::Schema { row: 1, .. }
        ));
    }

    #[test]
    fn holiday_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("h.txt");
        let set: BTreeSet<NaiveDate> = [d(2016, 1, 6), d(2016, 8, 15)].into_iter().collect();
        write_holidays(&path, &set).unwrap();
        assert_eq!(read_holidays(&path).unwrap(), set);
    }

    #[test]
    fn missing_file_reports_the_path() {
        let err = read_daily_csv(Path::new("/nonexistent/series.csv")).unwrap_err();
        match err {
            Error::Io { path, .. } => assert!(path.contains("series.csv")),
            other => panic!("expected i/o error, got {other}"),
        }
    }
}
