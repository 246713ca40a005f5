use std::path::{Path, PathBuf};
use std::time::Instant;

use pichange::evaluate::{table1_csv, table2_csv, AggregateStats, TableRow};
use pichange::{classify, error_stats, Error, EvalReport, MatchConfig, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{detection_path, Detection};
use crate::manifest::RunManifest;
use crate::simulate::{truth_path, Truth};

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Directory written by `detect`.
    #[arg(long)]
    detections: PathBuf,
    /// Directory written by `simulate`.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Matching window in index units.
    #[arg(long, default_value_t = 90)]
    window: usize,
    /// Method label for the tables; inferred from the detections when absent.
    #[arg(long)]
    method: Option<String>,
    /// Contrast label for the tables; taken from the truth sidecars when absent.
    #[arg(long)]
    contrast: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesEval {
    pub id: String,
    pub window: usize,
    pub report: EvalReport,
}

pub fn eval_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.eval.json"))
}

fn pair_ids(args: &Args) -> Result<Vec<String>> {
    let det = crate::series_ids(&args.detections, ".detect.json")?;
    let truth = crate::series_ids(&args.truth, ".truth.json")?;
    let mut missing: Vec<String> = det
        .iter()
        .filter(|id| !truth.contains(id))
        .map(|id| format!("{id} (no truth)"))
        .collect();
    missing.extend(
        truth
            .iter()
            .filter(|id| !det.contains(id))
            .map(|id| format!("{id} (no detection)")),
    );
    if !missing.is_empty() {
        return Err(Error::Validation(format!("unpaired series: {}", missing.join(", "))));
    }
    if det.is_empty() {
        return Err(Error::Validation("no series to evaluate".into()));
    }
    Ok(det)
}

fn single_label(labels: impl Iterator<Item = String>) -> String {
    let mut labels: Vec<String> = labels.collect();
    labels.sort();
    labels.dedup();
    match labels.as_slice() {
        [one] => one.clone(),
        _ => "Mixed".into(),
    }
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
        .unwrap_or_default()
}

pub fn run(args: &Args) -> Result<()> {
    let started = Instant::now();
    let ids = pair_ids(args)?;
    crate::create_dir(&args.out)?;
    let cfg = MatchConfig { window: args.window };
    let results: Vec<(String, String, EvalReport)> = ids
        .par_iter()
        .map(|id| {
            let det: Detection = crate::read_json(&detection_path(&args.detections, id))?;
            let truth: Truth = crate::read_json(&truth_path(&args.truth, id))?;
            let report = classify(&det.change_points, &truth.true_cps, &cfg)?;
            let eval = SeriesEval {
                id: id.clone(),
                window: args.window,
                report,
            };
            crate::write_json(&eval_path(&args.out, id), &eval)?;
            let method = if det.config_echo.lambda == 0.0 { "PELT" } else { "Pi-Change" };
            Ok((method.to_string(), capitalise(truth.spec.contrast.name()), eval.report))
        })
        .collect::<Result<_>>()?;

    let method = args
        .method
        .clone()
        .unwrap_or_else(|| single_label(results.iter().map(|r| r.0.clone())));
    let contrast = args
        .contrast
        .clone()
        .unwrap_or_else(|| single_label(results.iter().map(|r| r.1.clone())));
    let reports: Vec<EvalReport> = results.into_iter().map(|r| r.2).collect();
    let stats = error_stats(&reports)?;
    let row = TableRow {
        method: &method,
        contrast: &contrast,
        stats: &stats,
    };
    write_text(&args.out.join("table1.csv"), &table1_csv(std::slice::from_ref(&row))?)?;
    write_text(&args.out.join("table2.csv"), &table2_csv(std::slice::from_ref(&row))?)?;
    let by_cluster = AggregateStats {
        closest: stats.cluster_mean.clone(),
        ..stats.clone()
    };
    let row = TableRow {
        stats: &by_cluster,
        ..row
    };
    write_text(
        &args.out.join("table2_cluster_mean.csv"),
        &table2_csv(std::slice::from_ref(&row))?,
    )?;
    crate::write_json(&args.out.join("summary.json"), &stats)?;

    let mut m = RunManifest::new("evaluate", serde_json::to_value(args).unwrap_or_default());
    m.inputs = vec![
        args.detections.display().to_string(),
        args.truth.display().to_string(),
    ];
    m.write(&args.out, started)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| crate::io_err(path, e))
}
