//! Window-based classification of change-point estimates against labeled truth.
//!
//! Estimates are assigned in a fixed order: to the nearest target (sleep or
//! wake onset) within the window, then to a within-day change within the
//! window, and otherwise counted as stray. Per target, the closest assigned
//! estimate is the match and any others are clustered false positives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::LabeledCp;

/// Matching window in index units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub window: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { window: 90 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateClass {
    Match,
    ClusteredFp,
    IrrelevantFp,
    StrayFp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub detected: usize,
    pub false_negative: usize,
    pub clustered_fp: usize,
    pub irrelevant_fp: usize,
    pub stray_fp: usize,
}

/// Error of one detected target under both conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedError {
    pub target: usize,
    /// Distance to the closest assigned estimate.
    pub closest: f64,
    /// Distance to the mean of all assigned estimates.
    pub cluster_mean: f64,
    pub cluster_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub counts: OutcomeCounts,
    pub n_targets: usize,
    pub n_estimates: usize,
    pub matched_errors: Vec<MatchedError>,
    /// `(estimate, class)` for every estimate, in input order.
    pub classifications: Vec<(usize, EstimateClass)>,
}

fn nearest_within(points: &[usize], x: usize, window: usize) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, &p) in points.iter().enumerate() {
        let d = p.abs_diff(x);
        if d <= window && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

pub fn classify(estimates: &[usize], truth: &[LabeledCp], cfg: &MatchConfig) -> Result<EvalReport> {
    if estimates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation(
            "estimates must be strictly increasing".into(),
        ));
    }
    let mut targets: Vec<usize> = truth.iter().filter(|c| c.label.is_target()).map(|c| c.index).collect();
    let mut within_day: Vec<usize> =
        truth.iter().filter(|c| !c.label.is_target()).map(|c| c.index).collect();
    targets.sort_unstable();
    within_day.sort_unstable();

    let w = cfg.window;
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); targets.len()];
    let mut classes: Vec<Option<EstimateClass>> = vec![None; estimates.len()];
    for (k, &e) in estimates.iter().enumerate() {
        // scanning sorted targets keeps the earlier target on distance ties
        if let Some(i) = nearest_within(&targets, e, w) {
            assigned[i].push(k);
        } else if nearest_within(&within_day, e, w).is_some() {
            classes[k] = Some(EstimateClass::IrrelevantFp);
        } else {
            classes[k] = Some(EstimateClass::StrayFp);
        }
    }

    let mut counts = OutcomeCounts::default();
    let mut matched_errors = Vec::new();
    for (i, members) in assigned.iter().enumerate() {
        let target = targets[i];
        if members.is_empty() {
            counts.false_negative += 1;
            continue;
        }
        counts.detected += 1;
        // members are in increasing estimate order, so min_by_key keeps the earlier one
        let best = *members
            .iter()
            .min_by_key(|&&k| estimates[k].abs_diff(target))
            .expect("nonempty");
        for &k in members {
            classes[k] = Some(if k == best {
                EstimateClass::Match
            } else {
                EstimateClass::ClusteredFp
            });
        }
        counts.clustered_fp += members.len() - 1;
        let mean = members.iter().map(|&k| estimates[k] as f64).sum::<f64>() / members.len() as f64;
        matched_errors.push(MatchedError {
            target,
            closest: estimates[best].abs_diff(target) as f64,
            cluster_mean: (mean - target as f64).abs(),
            cluster_size: members.len(),
        });
    }
    let classifications: Vec<(usize, EstimateClass)> = estimates
        .iter()
        .zip(classes)
        .map(|(&e, c)| (e, c.expect("every estimate classified")))
        .collect();
    counts.irrelevant_fp = classifications
        .iter()
        .filter(|(_, c)| *c == EstimateClass::IrrelevantFp)
        .count();
    counts.stray_fp = classifications
        .iter()
        .filter(|(_, c)| *c == EstimateClass::StrayFp)
        .count();
    Ok(EvalReport {
        counts,
        n_targets: targets.len(),
        n_estimates: estimates.len(),
        matched_errors,
        classifications,
    })
}

/// Quantile at probability `p` of a sorted, nonempty slice.
///
/// Takes the element whose rank is nearest the interpolation position
/// `p (n - 1)`, rounding halves up.
pub fn nearest_rank_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let idx = (pos + 0.5).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub mae: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q90: f64,
    pub q95: f64,
    pub max: f64,
}

impl ErrorSummary {
    /// `None` for an empty pool.
    pub fn from_errors(errors: &[f64]) -> Option<Self> {
        if errors.is_empty() {
            return None;
        }
        let mut v = errors.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p| nearest_rank_quantile(&v, p);
        Some(Self {
            count: v.len(),
            mae: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q25: q(0.25),
            q50: q(0.50),
            q75: q(0.75),
            q90: q(0.90),
            q95: q(0.95),
            max: v[v.len() - 1],
        })
    }
}

/// Per-series means of each outcome and pooled error statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub n_series: usize,
    pub mean_false_negative: f64,
    pub mean_clustered_fp: f64,
    pub mean_irrelevant_fp: f64,
    pub mean_stray_fp: f64,
    /// Closest-estimate errors.
    pub closest: Option<ErrorSummary>,
    /// Mean-of-cluster errors.
    pub cluster_mean: Option<ErrorSummary>,
}

pub fn error_stats(reports: &[EvalReport]) -> Result<AggregateStats> {
    if reports.is_empty() {
        return Err(Error::Validation("no reports to aggregate".into()));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&OutcomeCounts) -> usize| {
        reports.iter().map(|r| f(&r.counts) as f64).sum::<f64>() / n
    };
    let closest: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.matched_errors.iter().map(|m| m.closest))
        .collect();
    let cluster: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.matched_errors.iter().map(|m| m.cluster_mean))
        .collect();
    Ok(AggregateStats {
        n_series: reports.len(),
        mean_false_negative: mean(|c| c.false_negative),
        mean_clustered_fp: mean(|c| c.clustered_fp),
        mean_irrelevant_fp: mean(|c| c.irrelevant_fp),
        mean_stray_fp: mean(|c| c.stray_fp),
        closest: ErrorSummary::from_errors(&closest),
        cluster_mean: ErrorSummary::from_errors(&cluster),
    })
}

pub const TABLE1_HEADER: [&str; 6] = [
    "Method",
    "Contrast",
    "False Negative",
    "Clustered FP",
    "Irrelevant FP",
    "Stray FP",
];

pub const TABLE2_HEADER: [&str; 10] = [
    "Method", "Contrast", "MAE", "Min", "25%", "50%", "75%", "90%", "95%", "Max",
];

/// One labeled row of an aggregate table.
#[derive(Debug, Clone)]
pub struct TableRow<'a> {
    pub method: &'a str,
    pub contrast: &'a str,
    pub stats: &'a AggregateStats,
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| Error::Io(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Outcome means per series, three decimals.
pub fn table1_csv(rows: &[TableRow<'_>]) -> Result<String> {
    csv_string(|w| {
        w.write_record(TABLE1_HEADER)?;
        for r in rows {
            let s = r.stats;
            w.write_record([
                r.method.to_string(),
                r.contrast.to_string(),
                format!("{:.3}", s.mean_false_negative),
                format!("{:.3}", s.mean_clustered_fp),
                format!("{:.3}", s.mean_irrelevant_fp),
                format!("{:.3}", s.mean_stray_fp),
            ])?;
        }
        Ok(())
    })
}

/// Closest-estimate error summary; empty cells when nothing was detected.
pub fn table2_csv(rows: &[TableRow<'_>]) -> Result<String> {
    csv_string(|w| {
        w.write_record(TABLE2_HEADER)?;
        for r in rows {
            let mut rec = vec![r.method.to_string(), r.contrast.to_string()];
            match &r.stats.closest {
                Some(e) => rec.extend(
                    [e.mae, e.min, e.q25, e.q50, e.q75, e.q90, e.q95, e.max]
                        .iter()
                        .enumerate()
                        .map(|(i, v)| if i == 0 { format!("{v:.3}") } else { format!("{v}") }),
                ),
                None => rec.extend(std::iter::repeat_n(String::new(), 8)),
            }
            w.write_record(rec)?;
        }
        Ok(())
    })
}
