//! CSV loading for real-data workflows.

use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::KernelSpec;
use crate::series::TimeSeries;

/// Column selected by header name or 0-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Position(usize),
    Name(String),
}

impl ColumnRef {
    /// Digits select a position, anything else a header name.
    pub fn parse(s: &str) -> Self {
        s.parse::<usize>()
            .map(ColumnRef::Position)
            .unwrap_or_else(|_| ColumnRef::Name(s.to_string()))
    }

    fn resolve(&self, headers: &csv::StringRecord) -> Result<usize> {
        match self {
            ColumnRef::Position(i) if *i < headers.len() => Ok(*i),
            ColumnRef::Position(i) => Err(Error::Format(format!(
                "column {i} does not exist (header has {} columns)",
                headers.len()
            ))),
            ColumnRef::Name(name) => headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Format(format!("no column named '{name}' in header"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    /// `|y_t - y_{t-1}|`, one shorter than the input.
    AbsDiff,
    /// Natural log; every value must be positive.
    LogScale,
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(Transform::Identity),
            "absdiff" | "abs-diff" => Ok(Transform::AbsDiff),
            "log" | "logscale" | "log-scale" => Ok(Transform::LogScale),
            other => Err(Error::Config(format!("unknown transform '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    /// Without a time column rows keep file order and carry no timestamps.
    pub time_column: Option<ColumnRef>,
    pub value_column: ColumnRef,
    /// chrono format string; ISO-8601 variants are tried when absent.
    pub date_format: Option<String>,
    pub transform: Transform,
    pub delimiter: u8,
}

impl ColumnSpec {
    pub fn new(time_column: Option<ColumnRef>, value_column: ColumnRef) -> Self {
        Self {
            time_column,
            value_column,
            date_format: None,
            transform: Transform::Identity,
            delimiter: b',',
        }
    }

    pub fn with_transform(mut self, t: Transform) -> Self {
        self.transform = t;
        self
    }

    pub fn with_date_format(mut self, f: impl Into<String>) -> Self {
        self.date_format = Some(f.into());
        self
    }
}

/// Parses a calendar instant. With `format`, it is tried as a datetime and
/// then as a date (`%Y` alone is accepted as January 1st). Without one,
/// RFC 3339 and the ISO-8601 forms `YYYY-MM-DD[THH:MM:SS]`, `YYYY-MM` and
/// `YYYY` are accepted.
pub fn parse_instant(s: &str, format: Option<&str>) -> Result<NaiveDateTime> {
    let s = s.trim();
    let midnight = |d: NaiveDate| d.and_hms_opt(0, 0, 0).expect("valid midnight");
    let year_only = |s: &str| -> Option<NaiveDateTime> {
        let y: i32 = s.parse().ok()?;
        NaiveDate::from_ymd_opt(y, 1, 1).map(midnight)
    };
    if let Some(f) = format {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, f) {
            return Ok(dt);
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, f) {
            return Ok(midnight(d));
        }
        if f == "%Y" {
            if let Some(dt) = year_only(s) {
                return Ok(dt);
            }
        }
        return Err(Error::Format(format!("cannot parse '{s}' with format '{f}'")));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_utc());
    }
    for f in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, f) {
            return Ok(dt);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(midnight(d));
    }
    if let Ok(d) = NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d") {
        return Ok(midnight(d));
    }
    if s.len() == 4 {
        if let Some(dt) = year_only(s) {
            return Ok(dt);
        }
    }
    Err(Error::Format(format!("cannot parse '{s}' as an ISO-8601 date")))
}

/// A loaded series plus bookkeeping about skipped rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSeries {
    pub series: TimeSeries,
    /// Rows dropped because the value cell was empty.
    pub dropped_missing: usize,
}

pub fn load_csv(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<TimeSeries> {
    load_csv_report(path, spec).map(|l| l.series)
}

pub fn load_csv_report(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<LoadedSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, spec)
}

/// Reads from any source; see [`load_csv`].
pub fn read_csv<R: std::io::Read>(reader: R, spec: &ColumnSpec) -> Result<LoadedSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("header: {e}")))?
        .clone();
    let value_col = spec.value_column.resolve(&headers)?;
    let time_col = spec
        .time_column
        .as_ref()
        .map(|c| c.resolve(&headers))
        .transpose()?;

    let mut rows: Vec<(Option<NaiveDateTime>, f64)> = Vec::new();
    let mut dropped_missing = 0;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Format(format!("row {line}: {e}")))?;
        let raw = rec.get(value_col).unwrap_or("");
        if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw == "." {
            dropped_missing += 1;
            continue;
        }
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::Format(format!("row {line}: cannot parse value '{raw}'")))?;
        if !value.is_finite() {
            return Err(Error::Format(format!("row {line}: value '{raw}' is not finite")));
        }
        let ts = match time_col {
            Some(c) => {
                let cell = rec.get(c).unwrap_or("");
                Some(
                    parse_instant(cell, spec.date_format.as_deref())
                        .map_err(|e| Error::Format(format!("row {line}: {e}")))?,
                )
            }
            None => None,
        };
        rows.push((ts, value));
    }
    if rows.is_empty() {
        return Err(Error::Format("file has no data rows".into()));
    }

    let has_time = time_col.is_some();
    if has_time {
        rows.sort_by_key(|(t, _)| *t);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation(format!(
                "duplicate timestamp {}",
                w[0].0.expect("timestamped row")
            )));
        }
    }

    let (mut times, mut values): (Vec<Option<NaiveDateTime>>, Vec<f64>) = rows.into_iter().unzip();
    match spec.transform {
        Transform::Identity => {}
        Transform::AbsDiff => {
            if values.len() < 2 {
                return Err(Error::Length("absdiff needs at least two rows".into()));
            }
            values = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            times.remove(0);
        }
        Transform::LogScale => {
            if let Some(v) = values.iter().find(|v| **v <= 0.0) {
                return Err(Error::Domain(format!(
                    "log scale needs positive values, found {v}"
                )));
            }
            values.iter_mut().for_each(|v| *v = v.ln());
        }
    }
    let series = if has_time {
        TimeSeries::with_timestamps(values, times.into_iter().map(|t| t.expect("timestamp")).collect())?
    } else {
        TimeSeries::new(values)?
    };
    Ok(LoadedSeries {
        series,
        dropped_missing,
    })
}

/// Writes `timestamp,value` (or `index,value` without timestamps) using the
/// shortest representation that reads back to the same `f64`.
pub fn write_csv(path: impl AsRef<Path>, series: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    let io = |e: csv::Error| Error::Io(e.to_string());
    match series.timestamps() {
        Some(ts) => {
            w.write_record(["timestamp", "value"]).map_err(io)?;
            for (t, v) in ts.iter().zip(series.values()) {
                w.write_record([t.format("%Y-%m-%dT%H:%M:%S%.f").to_string(), v.to_string()])
                    .map_err(io)?;
            }
        }
        None => {
            w.write_record(["index", "value"]).map_err(io)?;
            for (i, v) in series.values().iter().enumerate() {
                w.write_record([(i + 1).to_string(), v.to_string()]).map_err(io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Maps each date onto the nearest timestamp and attaches `sigma`.
pub fn resolve_centers(
    series: &TimeSeries,
    dates: &[NaiveDateTime],
    sigma: f64,
) -> Result<Vec<KernelSpec>> {
    dates
        .iter()
        .map(|d| {
            let idx = series.index_of_timestamp(*d).map_err(|e| match e {
                Error::Range(_) => Error::Range(format!("center date {d} is outside the series")),
                other => other,
            })?;
            KernelSpec::new(idx, sigma)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Datelike, Duration, Weekday};
    use proptest::prelude::*;
    use std::io::Write;

    fn load_str(text: &str, spec: &ColumnSpec) -> Result<LoadedSeries> {
        read_csv(text.as_bytes(), spec)
    }

    fn dated() -> ColumnSpec {
        ColumnSpec::new(Some(ColumnRef::parse("date")), ColumnRef::parse("close"))
    }

    #[test]
    fn absdiff_example() {
        let text = "date,close\n2000-01-03,10\n2000-01-04,12\n2000-01-05,9\n";
        let l = load_str(text, &dated().with_transform(Transform::AbsDiff)).unwrap();
        assert_eq!(l.series.values(), &[2.0, 3.0]);
        let ts = l.series.timestamps().unwrap();
        assert_eq!(ts[0], parse_instant("2000-01-04", None).unwrap());
    }

    #[test]
    fn identity_three_rows() {
        let text = "date,close\n2000-01-03,10\n2000-01-04,12\n2000-01-05,9\n";
        let s = load_str(text, &dated()).unwrap().series;
        assert_eq!(s.len(), 3);
        let ts = s.timestamps().unwrap();
        assert!(ts[0] < ts[1] && ts[1] < ts[2]);
    }

    #[test]
    fn shuffled_rows_load_sorted() {
        let sorted = [
            ("1990-02-01", 1.5), ("1990-02-02", 2.5), ("1990-02-05", 0.5), ("1990-02-06", 4.0),
            ("1990-02-07", 3.0), ("1990-02-08", 9.0), ("1990-02-09", 8.0), ("1990-02-12", 7.5),
            ("1990-02-13", 6.0), ("1990-02-14", 5.0),
        ];
        let order = [6, 2, 9, 0, 4, 7, 1, 8, 3, 5];
        let mut text = String::from("date,close\n");
        for &i in &order {
            text.push_str(&format!("{},{}\n", sorted[i].0, sorted[i].1));
        }
        let s = load_str(&text, &dated()).unwrap().series;
        let want: Vec<f64> = sorted.iter().map(|r| r.1).collect();
        assert_eq!(s.values(), &want[..]);
    }

    #[test]
    fn error_paths() {
        let bad_value = "date,close\n2000-01-03,10\n2000-01-04,abc\n";
        let e = load_str(bad_value, &dated()).unwrap_err();
        assert!(matches!(&e, Error::Format(m) if m.contains("row 3")), "{e}");

        let bad_date = "date,close\n2000-13-03,10\n";
        assert!(matches!(load_str(bad_date, &dated()), Err(Error::Format(_))));

        let dup = "date,close\n2000-01-03,10\n2000-01-03,11\n";
        assert!(matches!(load_str(dup, &dated()), Err(Error::Validation(_))));

        let nonpos = "date,close\n2000-01-03,10\n2000-01-04,0\n";
        assert!(matches!(
            load_str(nonpos, &dated().with_transform(Transform::LogScale)),
            Err(Error::Domain(_))
        ));

        let missing_col = ColumnSpec::new(None, ColumnRef::parse("price"));
        assert!(matches!(load_str("date,close\n1,2\n", &missing_col), Err(Error::Format(_))));
    }

    #[test]
    fn empty_cells_are_dropped_and_counted() {
        let text = "date,close\n2000-01-03,10\n2000-01-04,\n2000-01-05,9\n";
        let l = load_str(text, &dated()).unwrap();
        assert_eq!(l.series.values(), &[10.0, 9.0]);
        assert_eq!(l.dropped_missing, 1);
    }

    #[test]
    fn log_scale_and_positions() {
        let text = "year,deaths\n1914,1000\n1939,2000\n";
        let spec = ColumnSpec::new(Some(ColumnRef::Position(0)), ColumnRef::Position(1))
            .with_date_format("%Y")
            .with_transform(Transform::LogScale);
        let s = load_str(text, &spec).unwrap().series;
        assert!((s.values()[1] - 2000f64.ln()).abs() < 1e-15);
        assert_eq!(s.timestamps().unwrap()[0].year(), 1914);
    }

    #[test]
    fn parse_instant_forms() {
        let d = parse_instant("2005-08-26", None).unwrap();
        assert_eq!(d, NaiveDate::from_ymd_opt(2005, 8, 26).unwrap().and_hms_opt(0, 0, 0).unwrap());
        assert_eq!(parse_instant("2005-08-26T00:00:00", None).unwrap(), d);
        assert_eq!(parse_instant("2005-08-26T02:00:00+02:00", None).unwrap(), d);
        assert_eq!(parse_instant("1914", None).unwrap().year(), 1914);
        assert_eq!(parse_instant("1914-07", None).unwrap().month(), 7);
        assert_eq!(parse_instant("26/08/2005", Some("%d/%m/%Y")).unwrap(), d);
        assert!(parse_instant("yesterday", None).is_err());
    }

    fn weekday_series() -> TimeSeries {
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        let ts: Vec<NaiveDateTime> = (0..400)
            .map(|i| start + Duration::days(i))
            .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
            .map(|d| d.and_hms_opt(0, 0, 0).unwrap())
            .collect();
        TimeSeries::with_timestamps(vec![1.0; ts.len()], ts).unwrap()
    }

    #[test]
    fn centers_from_dates() {
        let s = weekday_series();
        let ts = s.timestamps().unwrap().to_vec();
        let k = resolve_centers(&s, &[ts[10]], 130.0).unwrap();
        assert_eq!(k, vec![KernelSpec::new(11, 130.0).unwrap()]);

        // a Saturday: equidistant-in-days neighbours resolve by linear scan
        let sat = parse_instant("2000-08-26", None).unwrap();
        let scan = ts
            .iter()
            .enumerate()
            .min_by_key(|(_, t)| (**t - sat).num_seconds().abs())
            .map(|(i, _)| i + 1)
            .unwrap();
        assert_eq!(resolve_centers(&s, &[sat], 5.0).unwrap()[0].center, scan);

        let dates: Vec<NaiveDateTime> = ["2000-01-03", "2000-03-15", "2000-06-30", "2001-01-02"]
            .iter()
            .map(|d| parse_instant(d, None).unwrap())
            .collect();
        let ks = resolve_centers(&s, &dates, 130.0).unwrap();
        assert_eq!(ks.len(), 4);
        assert!(ks.iter().all(|k| k.spread == 130.0));

        let late = parse_instant("2003-01-01", None).unwrap();
        let e = resolve_centers(&s, &[late], 1.0).unwrap_err();
        assert!(matches!(&e, Error::Range(m) if m.contains("2003-01-01")));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn write_then_load_round_trips(values in prop::collection::vec(-1e9f64..1e9, 1..50), dated in any::<bool>()) {
            let series = if dated {
                let start = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
                let ts = (0..values.len()).map(|i| (start + Duration::days(i as i64)).and_hms_opt(0, 0, 0).unwrap()).collect();
                TimeSeries::with_timestamps(values.clone(), ts).unwrap()
            } else {
                TimeSeries::new(values.clone()).unwrap()
            };
            let mut file = tempfile::NamedTempFile::new().unwrap();
            file.flush().unwrap();
            write_csv(file.path(), &series).unwrap();
            let spec = if dated {
                ColumnSpec::new(Some(ColumnRef::parse("timestamp")), ColumnRef::parse("value"))
            } else {
                ColumnSpec::new(None, ColumnRef::parse("value"))
            };
            let back = load_csv(file.path(), &spec).unwrap();
            prop_assert_eq!(back.values(), series.values());
            prop_assert_eq!(back.timestamps(), series.timestamps());
        }

        #[test]
        fn absdiff_is_nonnegative_and_shorter(values in prop::collection::vec(-100.0f64..100.0, 2..40)) {
            let mut text = String::from("index,value\n");
            for (i, v) in values.iter().enumerate() {
                text.push_str(&format!("{},{}\n", i + 1, v));
            }
            let spec = ColumnSpec::new(None, ColumnRef::parse("value")).with_transform(Transform::AbsDiff);
            let s = load_str(&text, &spec).unwrap().series;
            prop_assert_eq!(s.len(), values.len() - 1);
            prop_assert!(s.values().iter().all(|v| *v >= 0.0));
        }
    }
}
