use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pichange::{build_profile, Error, KernelSpec, Result};
use serde::Serialize;

use crate::detect::Detection;
use crate::evaluate::SeriesEval;
use crate::manifest::RunManifest;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Directories written by `evaluate`.
    #[arg(long, num_args = 1.., required_unless_present = "penalty_from")]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Error histogram bin width in index units.
    #[arg(long, default_value_t = 5.0)]
    bin_width: f64,
    /// Detection JSON whose penalty profile is traced to `penalty_trace.csv`.
    #[arg(long)]
    penalty_from: Option<PathBuf>,
}

/// `(bin_start, bin_end, count)` over `[0, width)`, `[width, 2 width)`, ...
pub fn histogram(values: &[f64], width: f64) -> Vec<(f64, f64, usize)> {
    let Some(max) = values.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let bins = (max / width).floor() as usize + 1;
    let mut counts = vec![0; bins];
    for v in values {
        counts[((v / width).floor() as usize).min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * width, (i + 1) as f64 * width, c))
        .collect()
}

fn load_run(dir: &Path) -> Result<Vec<SeriesEval>> {
    let ids = crate::series_ids(dir, ".eval.json")?;
    if ids.is_empty() {
        return Err(Error::Validation(format!(
            "no series_*.eval.json files in {}",
            dir.display()
        )));
    }
    ids.iter()
        .map(|id| crate::read_json(&crate::evaluate::eval_path(dir, id)))
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| crate::io_err(path, e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn run(args: &Args) -> Result<()> {
    let started = Instant::now();
    if !(args.bin_width > 0.0 && args.bin_width.is_finite()) {
        return Err(Error::Config("--bin-width must be positive".into()));
    }
    let runs: Vec<(String, Vec<SeriesEval>)> = args
        .runs
        .iter()
        .map(|d| Ok((d.display().to_string(), load_run(d)?)))
        .collect::<Result<_>>()?;
    crate::create_dir(&args.out)?;

    let mut fnw = writer(&args.out.join("fn_hist.csv"))?;
    fnw.write_record(["run", "false_negatives", "series"]).map_err(csv_err)?;
    let mut fpw = writer(&args.out.join("fp_hist.csv"))?;
    fpw.write_record(["run", "type", "count", "series"]).map_err(csv_err)?;
    let mut errw = writer(&args.out.join("error_hist.csv"))?;
    errw.write_record(["run", "convention", "bin_start", "bin_end", "count"])
        .map_err(csv_err)?;

    for (name, evals) in &runs {
        let mut fn_counts: BTreeMap<usize, usize> = BTreeMap::new();
        for e in evals {
            *fn_counts.entry(e.report.counts.false_negative).or_default() += 1;
        }
        for (k, v) in fn_counts {
            fnw.write_record([name.clone(), k.to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
        type Pick = fn(&SeriesEval) -> usize;
        let kinds: [(&str, Pick); 3] = [
            ("clustered", |e| e.report.counts.clustered_fp),
            ("irrelevant", |e| e.report.counts.irrelevant_fp),
            ("stray", |e| e.report.counts.stray_fp),
        ];
        for (kind, pick) in kinds {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for e in evals {
                *counts.entry(pick(e)).or_default() += 1;
            }
            for (k, v) in counts {
                fpw.write_record([name.clone(), kind.to_string(), k.to_string(), v.to_string()])
                    .map_err(csv_err)?;
            }
        }
        let closest: Vec<f64> = evals
            .iter()
            .flat_map(|e| e.report.matched_errors.iter().map(|m| m.closest))
            .collect();
        let cluster: Vec<f64> = evals
            .iter()
            .flat_map(|e| e.report.matched_errors.iter().map(|m| m.cluster_mean))
            .collect();
        for (conv, values) in [("closest", &closest), ("cluster_mean", &cluster)] {
            for (lo, hi, c) in histogram(values, args.bin_width) {
                errw.write_record([name.clone(), conv.into(), lo.to_string(), hi.to_string(), c.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    for w in [&mut fnw, &mut fpw, &mut errw] {
        w.flush()?;
    }

    if let Some(path) = &args.penalty_from {
        write_trace(path, &args.out.join("penalty_trace.csv"))?;
    }

    let mut m = RunManifest::new("report", serde_json::to_value(args).unwrap_or_default());
    m.inputs = args.runs.iter().map(|p| p.display().to_string()).collect();
    m.write(&args.out, started)
}

fn write_trace(detection: &Path, out: &Path) -> Result<()> {
    let det: Detection = crate::read_json(detection)?;
    let c = &det.config_echo;
    let kernels = KernelSpec::shared(&c.centers, c.sigma)?;
    let profile = build_profile(c.n, &kernels, c.lambda, c.beta)?;
    let mut w = writer(out)?;
    w.write_record(["index", "S", "g"]).map_err(csv_err)?;
    for t in 1..=c.n {
        w.write_record([t.to_string(), profile.support(t).to_string(), profile.g(t).to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
