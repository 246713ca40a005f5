use std::path::{Path, PathBuf};
use std::time::Instant;

use pichange::simulate::{LabeledCp, SegmentRecord};
use pichange::{ingest, simulate, Contrast, PriorMode, Result, ScenarioSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// low, moderate or high.
    #[arg(long)]
    contrast: Contrast,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// accurate, inaccurate or exact.
    #[arg(long, default_value = "accurate")]
    prior_mode: PriorMode,
    #[arg(long, default_value_t = 7)]
    cycles: usize,
    /// Minutes per index.
    #[arg(long, default_value_t = 1)]
    resolution: u32,
    #[arg(long)]
    out: PathBuf,
}

/// Everything about a simulated series except its values.
#[derive(Debug, Serialize, Deserialize)]
pub struct Truth {
    pub spec: ScenarioSpec,
    pub n: usize,
    pub shape: f64,
    pub true_cps: Vec<LabeledCp>,
    pub prior_centers: Vec<usize>,
    pub params_log: Vec<SegmentRecord>,
}

pub fn series_id(i: u64) -> String {
    format!("series_{i:04}")
}

pub fn truth_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.truth.json"))
}

pub fn run(args: &Args) -> Result<()> {
    let started = Instant::now();
    crate::create_dir(&args.out)?;
    (0..args.count).into_par_iter().try_for_each(|i| {
        let spec = ScenarioSpec::new(args.contrast, args.seed)
            .with_series_index(i)
            .with_prior_mode(args.prior_mode)
            .with_cycles(args.cycles)
            .with_resolution(args.resolution);
        let sim = simulate(&spec)?;
        let id = series_id(i);
        ingest::write_csv(args.out.join(format!("{id}.csv")), &sim.series)?;
        let truth = Truth {
            n: sim.series.len(),
            shape: sim.shape(),
            true_cps: sim.true_cps,
            prior_centers: sim.prior_centers,
            params_log: sim.params_log,
            spec: sim.spec,
        };
        crate::write_json(&truth_path(&args.out, &id), &truth)
    })?;
    let mut m = RunManifest::new("simulate", serde_json::to_value(args).unwrap_or_default());
    m.seed = Some(args.seed);
    m.write(&args.out, started)
}
