use std::path::{Path, PathBuf};
use std::time::Instant;

use pichange::cost::{CostCache, CostModel};
use pichange::ingest::{self, ColumnRef, ColumnSpec, Transform};
use pichange::penalty::{BetaRule, BetaSpec, CenterSpec, LambdaRule, LambdaSpec, PenaltyRecipe};
use pichange::{detect_with_cache, DetectorConfig, Error, Result, TimeSeries};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;
use crate::simulate::{truth_path, Truth};

#[derive(clap::ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostArg {
    Gaussian,
    Zag,
}

impl From<CostArg> for CostModel {
    fn from(c: CostArg) -> Self {
        match c {
            CostArg::Gaussian => CostModel::GaussianNll,
            CostArg::Zag => CostModel::ZagNll,
        }
    }
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformArg {
    Identity,
    Absdiff,
    Log,
}

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// CSV file, or a directory written by `simulate`.
    input: PathBuf,
    /// Output JSON file (file input, default stdout) or directory (directory input).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "zag")]
    cost: CostArg,
    /// Gamma shape for the ZAG cost; estimated from the data when absent.
    #[arg(long, conflicts_with = "known_shape")]
    shape: Option<f64>,
    /// Take the Gamma shape from each series' truth sidecar.
    #[arg(long)]
    known_shape: bool,
    /// `mbic` or a positive number.
    #[arg(long, default_value = "mbic")]
    beta: String,
    /// `auto` (equal to beta) or a nonnegative number.
    #[arg(long, default_value = "auto")]
    lambda: String,
    /// Kernel spread in index units.
    #[arg(long, default_value_t = 30.0)]
    sigma: f64,
    /// Comma-separated centers (all-digit tokens are indices, anything else
    /// a date), `sidecar` for each series' truth sidecar, or a JSON file with
    /// a `prior_centers` array.
    #[arg(long)]
    centers: Option<String>,
    /// JSON penalty recipe; replaces --beta, --lambda, --sigma and --centers.
    #[arg(long, conflicts_with_all = ["centers", "beta", "lambda", "sigma"])]
    penalty: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    min_seg: usize,
    /// Disable candidate pruning.
    #[arg(long)]
    no_prune: bool,
    /// Constant penalty: forces lambda to 0.
    #[arg(long)]
    pelt: bool,
    #[arg(long)]
    time_column: Option<String>,
    #[arg(long, default_value = "value")]
    value_column: String,
    #[arg(long)]
    date_format: Option<String>,
    #[arg(long, value_enum, default_value = "identity")]
    transform: TransformArg,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub input: String,
    pub n: usize,
    pub cost: String,
    pub shape: Option<f64>,
    pub beta: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub centers: Vec<usize>,
    pub min_segment_length: usize,
    pub pruning: bool,
    pub pruning_certified: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Detection {
    pub change_points: Vec<usize>,
    pub timestamps: Option<Vec<String>>,
    pub objective: f64,
    pub config_echo: ConfigEcho,
}

pub fn detection_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.detect.json"))
}

fn parse_beta(s: &str) -> Result<BetaSpec> {
    if s.eq_ignore_ascii_case("mbic") {
        return Ok(BetaSpec::Rule(BetaRule::Mbic));
    }
    s.parse()
        .map(BetaSpec::Value)
        .map_err(|_| Error::Config(format!("--beta expects 'mbic' or a number, got '{s}'")))
}

fn parse_lambda(s: &str) -> Result<LambdaSpec> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(LambdaSpec::Rule(LambdaRule::Auto));
    }
    s.parse()
        .map(LambdaSpec::Value)
        .map_err(|_| Error::Config(format!("--lambda expects 'auto' or a number, got '{s}'")))
}

#[derive(Deserialize)]
struct CenterFile {
    prior_centers: Vec<usize>,
}

enum Centers {
    Fixed(Vec<CenterSpec>),
    Sidecar,
}

fn parse_centers(arg: Option<&str>) -> Result<Centers> {
    let Some(arg) = arg else {
        return Ok(Centers::Fixed(Vec::new()));
    };
    if arg == "sidecar" {
        return Ok(Centers::Sidecar);
    }
    let path = Path::new(arg);
    if arg.ends_with(".json") && path.is_file() {
        let f: CenterFile = crate::read_json(path)?;
        return Ok(Centers::Fixed(f.prior_centers.into_iter().map(CenterSpec::Index).collect()));
    }
    let specs = arg
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<usize>() {
            Ok(i) => CenterSpec::Index(i),
            Err(_) => CenterSpec::Date(t.to_string()),
        })
        .collect();
    Ok(Centers::Fixed(specs))
}

struct Plan {
    model: CostModel,
    recipe: PenaltyRecipe,
    centers: Centers,
    column: ColumnSpec,
}

impl Plan {
    fn from_args(args: &Args) -> Result<Self> {
        let model = CostModel::from(args.cost);
        let (mut recipe, centers) = match &args.penalty {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| crate::io_err(path, e))?;
                (PenaltyRecipe::from_json(&text)?, Centers::Fixed(Vec::new()))
            }
            None => (
                PenaltyRecipe {
                    beta: parse_beta(&args.beta)?,
                    lambda: parse_lambda(&args.lambda)?,
                    centers: Vec::new(),
                    sigma: args.sigma,
                },
                parse_centers(args.centers.as_deref())?,
            ),
        };
        if args.pelt {
            recipe.lambda = LambdaSpec::Value(0.0);
        }
        if !args.delimiter.is_ascii() {
            return Err(Error::Config("--delimiter must be a single ASCII character".into()));
        }
        let transform = match args.transform {
            TransformArg::Identity => Transform::Identity,
            TransformArg::Absdiff => Transform::AbsDiff,
            TransformArg::Log => Transform::LogScale,
        };
        let mut column = ColumnSpec::new(
            args.time_column.as_deref().map(ColumnRef::parse),
            ColumnRef::parse(&args.value_column),
        )
        .with_transform(transform);
        column.date_format = args.date_format.clone();
        column.delimiter = args.delimiter as u8;
        Ok(Plan {
            model,
            recipe,
            centers,
            column,
        })
    }

    fn detect(&self, args: &Args, input: &Path, series: &TimeSeries, truth: Option<&Truth>) -> Result<Detection> {
        let mut recipe = self.recipe.clone();
        match &self.centers {
            Centers::Fixed(c) => recipe.centers.extend(c.iter().cloned()),
            Centers::Sidecar => {
                let t = truth.ok_or_else(|| {
                    Error::Config("--centers sidecar needs a simulate output directory".into())
                })?;
                recipe.centers.extend(t.prior_centers.iter().map(|&c| CenterSpec::Index(c)));
            }
        }
        if series.timestamps().is_none() && recipe.centers.iter().any(|c| matches!(c, CenterSpec::Date(_))) {
            return Err(Error::Config(
                "date centers need a time column (--time-column)".into(),
            ));
        }
        let shape = match (args.shape, args.known_shape) {
            (Some(s), _) => Some(s),
            (None, true) => Some(
                truth
                    .ok_or_else(|| Error::Config("--known-shape needs a simulate output directory".into()))?
                    .shape,
            ),
            (None, false) => None,
        };
        let cache = CostCache::build(series, self.model, shape)?;
        let penalty = recipe.resolve(series, self.model.params_per_segment())?;
        let config = DetectorConfig::new(self.model, penalty)
            .with_min_segment_length(args.min_seg)
            .with_pruning(!args.no_prune);
        let seg = detect_with_cache(&cache, &config)?;
        let timestamps = series.timestamps().map(|ts| {
            seg.change_points
                .iter()
                .map(|&cp| ts[cp - 1].format("%Y-%m-%dT%H:%M:%S").to_string())
                .collect()
        });
        Ok(Detection {
            change_points: seg.change_points,
            timestamps,
            objective: seg.total_objective,
            config_echo: ConfigEcho {
                input: input.display().to_string(),
                n: series.len(),
                cost: self.model.name().to_string(),
                shape: cache.shape(),
                beta: config.penalty.beta(),
                lambda: config.penalty.lambda(),
                sigma: recipe.sigma,
                centers: config.penalty.kernels().iter().map(|k| k.center).collect(),
                min_segment_length: config.effective_min_segment_length(),
                pruning: config.pruning_enabled,
                pruning_certified: config.is_pruning_certified(),
            },
        })
    }
}

pub fn run(args: &Args) -> Result<()> {
    let started = Instant::now();
    let plan = Plan::from_args(args)?;
    if args.input.is_dir() {
        return run_dir(args, &plan, started);
    }
    if args.known_shape {
        return Err(Error::Config("--known-shape needs a simulate output directory".into()));
    }
    let series = ingest::load_csv(&args.input, &plan.column)?;
    let det = plan.detect(args, &args.input, &series, None)?;
    match &args.out {
        Some(path) => crate::write_json(path, &det),
        None => {
            let text = serde_json::to_string_pretty(&det).map_err(|e| Error::Format(e.to_string()))?;
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io(e.to_string())),
                _ => Ok(()),
            }
        }
    }
}

fn run_dir(args: &Args, plan: &Plan, started: Instant) -> Result<()> {
    let out = args
        .out
        .as_ref()
        .ok_or_else(|| Error::Config("directory input needs --out DIR".into()))?;
    let ids = crate::series_ids(&args.input, ".csv")?;
    if ids.is_empty() {
        return Err(Error::Validation(format!(
            "no series_*.csv files in {}",
            args.input.display()
        )));
    }
    crate::create_dir(out)?;
    let needs_truth = args.known_shape || matches!(plan.centers, Centers::Sidecar);
    ids.par_iter().try_for_each(|id| {
        let csv = args.input.join(format!("{id}.csv"));
        let series = ingest::load_csv(&csv, &plan.column)?;
        let truth: Option<Truth> = if needs_truth {
            Some(crate::read_json(&truth_path(&args.input, id))?)
        } else {
            None
        };
        let det = plan.detect(args, &csv, &series, truth.as_ref())?;
        crate::write_json(&detection_path(out, id), &det)
    })?;
    let mut m = RunManifest::new("detect", serde_json::to_value(args).unwrap_or_default());
    m.inputs = vec![args.input.display().to_string()];
    m.write(out, started)
}
