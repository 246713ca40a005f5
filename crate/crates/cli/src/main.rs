//! `pichange` command-line tool.
//!
//! Subcommands share a worker pool sized by `--jobs` (or `PICHANGE_JOBS`).
//! Failures print a JSON object `{"error": kind, "message": ...}` on stderr
//! and exit nonzero.

mod detect;
mod evaluate;
mod manifest;
mod report;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pichange::Error;

#[derive(Parser, Debug)]
#[command(name = "pichange", version, about = "Prior-informed change-point detection")]
struct Cli {
    /// Worker threads for per-series work.
    #[arg(long, global = true, env = "PICHANGE_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate simulated sleep-wake series with truth sidecars.
    Simulate(simulate::Args),
    /// Detect change points in a CSV file or a simulate output directory.
    Detect(detect::Args),
    /// Score detections against truth sidecars.
    Evaluate(evaluate::Args),
    /// Emit histogram and penalty-trace CSVs for plotting.
    Report(report::Args),
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let body = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{body}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let body = serde_json::json!({ "error": "usage", "message": e.to_string() });
            eprintln!("{body}");
            return ExitCode::from(2);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return fail("config", "--jobs must be at least 1");
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail("config", &e.to_string()),
    };
    let result = pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Detect(a) => detect::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Report(a) => report::run(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub(crate) fn write_json(path: &std::path::Path, value: &impl serde::Serialize) -> pichange::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> pichange::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub(crate) fn create_dir(path: &std::path::Path) -> pichange::Result<()> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

/// Series ids (`series_0007`) found in `dir` for files named `<id><suffix>`.
pub(crate) fn series_ids(dir: &std::path::Path, suffix: &str) -> pichange::Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(suffix) {
            if id.starts_with("series_") {
                ids.push(id.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}
