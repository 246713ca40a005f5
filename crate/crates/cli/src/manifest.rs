use std::path::Path;
use std::time::Instant;

use serde::Serialize;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub output: String,
    pub seed: Option<u64>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, config: serde_json::Value) -> Self {
        Self {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs: Vec::new(),
            output: String::new(),
            seed: None,
            duration_secs: 0.0,
        }
    }

    pub fn write(mut self, dir: &Path, started: Instant) -> pichange::Result<()> {
        self.output = dir.display().to_string();
        self.duration_secs = started.elapsed().as_secs_f64();
        crate::write_json(&dir.join(FILE_NAME), &self)
    }
}
