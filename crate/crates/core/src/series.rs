//! Series and segmentation types shared by every module.
//!
//! All public indices are 1-based observation positions. A change point at
//! `t` places the segment boundary between observations `t` and `t + 1`, so
//! the segments of a segmentation with change points `τ_1 < ... < τ_m` are
//! `(τ_{j-1}, τ_j]` with the implicit boundaries `τ_0 = 0` and `τ_{m+1} = N`.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered, finite-valued series with optional calendar timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    timestamps: Option<Vec<NaiveDateTime>>,
    unit_label: String,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Length("a series needs at least one value".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "value at index {} is not finite ({})",
                i + 1,
                values[i]
            )));
        }
        Ok(Self {
            values,
            timestamps: None,
            unit_label: String::new(),
        })
    }

    pub fn with_timestamps(values: Vec<f64>, timestamps: Vec<NaiveDateTime>) -> Result<Self> {
        let mut series = Self::new(values)?;
        if timestamps.len() != series.values.len() {
            return Err(Error::Validation(format!(
                "{} timestamps for {} values",
                timestamps.len(),
                series.values.len()
            )));
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "timestamps must be strictly increasing (index {} is {}, index {} is {})",
                w + 1,
                timestamps[w],
                w + 2,
                timestamps[w + 1]
            )));
        }
        series.timestamps = Some(timestamps);
        Ok(series)
    }

    pub fn with_unit_label(mut self, label: impl Into<String>) -> Self {
        self.unit_label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: construction rejects empty series.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[NaiveDateTime]> {
        self.timestamps.as_deref()
    }

    pub fn unit_label(&self) -> &str {
        &self.unit_label
    }

    /// Timestamp of the 1-based observation `index`, if the series has timestamps.
    pub fn timestamp_at(&self, index: usize) -> Option<NaiveDateTime> {
        self.timestamps
            .as_ref()
            .and_then(|ts| index.checked_sub(1).and_then(|i| ts.get(i)).copied())
    }

    /// Maps a calendar instant onto the 1-based index of the nearest timestamp.
    ///
    /// Ties between two equally distant timestamps resolve to the earlier one.
    pub fn index_of_timestamp(&self, instant: NaiveDateTime) -> Result<usize> {
        let ts = self.timestamps.as_deref().ok_or_else(|| {
            Error::Unsupported("series has no timestamps to resolve dates against".into())
        })?;
        let (first, last) = (ts[0], ts[ts.len() - 1]);
        if instant < first || instant > last {
            return Err(Error::Range(format!(
                "instant {instant} lies outside the series range [{first}, {last}]"
            )));
        }
        // first index with ts[i] >= instant
        let upper = ts.partition_point(|t| *t < instant);
        if ts[upper] == instant || upper == 0 {
            return Ok(upper + 1);
        }
        let before = instant - ts[upper - 1];
        let after = ts[upper] - instant;
        Ok(if before <= after { upper } else { upper + 1 })
    }
}

/// A set of change points together with the objective they attain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// Strictly increasing interior change points, each in `1..N`.
    pub change_points: Vec<usize>,
    pub total_objective: f64,
    /// One cost per segment, `change_points.len() + 1` entries.
    pub segment_costs: Vec<f64>,
    /// Penalty charged at each change point, aligned with `change_points`.
    pub penalties: Vec<f64>,
    /// Series length the segmentation refers to.
    pub n: usize,
}

impl Segmentation {
    pub fn num_change_points(&self) -> usize {
        self.change_points.len()
    }

    /// Segments as 1-based inclusive `(first, last)` observation ranges.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        segment_bounds(&self.change_points, self.n)
    }
}

/// Expands change points into 1-based inclusive segment ranges.
pub fn segment_bounds(change_points: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(change_points.len() + 1);
    let mut prev = 0;
    for &cp in change_points.iter().chain(std::iter::once(&n)) {
        out.push((prev + 1, cp));
        prev = cp;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};

    fn daily(start: NaiveDate, n: usize) -> Vec<NaiveDateTime> {
        (0..n)
            .map(|i| (start + Duration::days(i as i64)).and_hms_opt(0, 0, 0).unwrap())
            .collect()
    }

    fn series_with(ts: Vec<NaiveDateTime>) -> TimeSeries {
        let n = ts.len();
        TimeSeries::with_timestamps(vec![0.0; n], ts).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(TimeSeries::new(vec![]), Err(Error::Length(_))));
        assert!(matches!(TimeSeries::new(vec![1.0, f64::NAN]), Err(Error::Domain(_))));
        assert!(matches!(
            TimeSeries::new(vec![f64::INFINITY]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rejects_unsorted_or_misaligned_timestamps() {
        let mut ts = daily(NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), 3);
        assert!(TimeSeries::with_timestamps(vec![1.0, 2.0], ts.clone()).is_err());
        ts.swap(0, 1);
        assert!(matches!(
            TimeSeries::with_timestamps(vec![1.0, 2.0, 3.0], ts),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn exact_timestamp_match() {
        let ts = daily(NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), 10);
        let s = series_with(ts.clone());
        assert_eq!(s.index_of_timestamp(ts[4]).unwrap(), 5);
        assert_eq!(s.index_of_timestamp(ts[0]).unwrap(), 1);
        assert_eq!(s.index_of_timestamp(ts[9]).unwrap(), 10);
    }

    #[test]
    fn midway_tie_goes_to_earlier_index() {
        let ts = daily(NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), 10);
        let s = series_with(ts.clone());
        let mid = ts[4] + Duration::hours(12);
        assert_eq!(s.index_of_timestamp(mid).unwrap(), 5);
        assert_eq!(s.index_of_timestamp(mid + Duration::seconds(1)).unwrap(), 6);
    }

    #[test]
    fn out_of_range_and_missing_timestamps() {
        let ts = daily(NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), 10);
        let s = series_with(ts.clone());
        assert!(matches!(
            s.index_of_timestamp(ts[0] - Duration::days(1)),
            Err(Error::Range(_))
        ));
        let plain = TimeSeries::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            plain.index_of_timestamp(ts[0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn matches_linear_scan_on_a_decade_of_days() {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2009, 12, 31).unwrap();
        let n = (end - start).num_days() as usize + 1;
        let ts = daily(start, n);
        let s = series_with(ts.clone());
        let instant = NaiveDate::from_ymd_opt(2005, 8, 26)
            .unwrap()
            .and_hms_opt(7, 30, 0)
            .unwrap();
        let scan = ts
            .iter()
            .enumerate()
            .min_by_key(|(_, t)| (**t - instant).num_seconds().abs())
            .map(|(i, _)| i + 1)
            .unwrap();
        assert_eq!(s.index_of_timestamp(instant).unwrap(), scan);
    }

    #[test]
    fn segment_bounds_cover_the_series() {
        assert_eq!(segment_bounds(&[], 5), vec![(1, 5)]);
        assert_eq!(segment_bounds(&[2, 4], 6), vec![(1, 2), (3, 4), (5, 6)]);
    }
}
