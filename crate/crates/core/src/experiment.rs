//! Detection settings for the simulated sleep-wake study.

use serde::{Deserialize, Serialize};

use crate::cost::{CostCache, CostModel};
use crate::detector::{detect_with_cache, DetectorConfig};
use crate::error::{Error, Result};
use crate::evaluate::{classify, EvalReport, MatchConfig};
use crate::penalty::{build_profile, default_lambda, modified_bic_beta, KernelSpec};
use crate::series::Segmentation;
use crate::simulate::SimulatedSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Prior-weighted penalty with `lambda = beta`.
    PiChange,
    /// Constant penalty `beta`.
    Pelt,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PiChange => "Pi-Change",
            Method::Pelt => "PELT",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pichange" | "pi-change" => Ok(Method::PiChange),
            "pelt" => Ok(Method::Pelt),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    /// Kernel spread in minutes.
    pub sigma_minutes: f64,
    pub min_segment_length: usize,
    pub window: usize,
    /// Use the generating shape instead of estimating it from the data.
    pub known_shape: bool,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            sigma_minutes: 30.0,
            min_segment_length: 1,
            window: 90,
            known_shape: true,
        }
    }
}

/// Runs one method on one simulated series with ZAG costs and a modified-BIC floor.
pub fn detect_simulated(
    sim: &SimulatedSeries,
    method: Method,
    settings: &StudySettings,
) -> Result<Segmentation> {
    let n = sim.series.len();
    let shape = settings.known_shape.then(|| sim.shape());
    let cache = CostCache::build(&sim.series, CostModel::ZagNll, shape)?;
    let beta = modified_bic_beta(n, CostModel::ZagNll.params_per_segment())?;
    let (lambda, kernels) = match method {
        Method::Pelt => (0.0, Vec::new()),
        Method::PiChange => {
            let spread = settings.sigma_minutes / sim.spec.resolution as f64;
            (default_lambda(beta), KernelSpec::shared(&sim.prior_centers, spread)?)
        }
    };
    let penalty = build_profile(n, &kernels, lambda, beta)?;
    let config = DetectorConfig::new(CostModel::ZagNll, penalty)
        .with_min_segment_length(settings.min_segment_length);
    detect_with_cache(&cache, &config)
}

/// Detects and classifies against the series' own truth labels.
pub fn evaluate_simulated(
    sim: &SimulatedSeries,
    method: Method,
    settings: &StudySettings,
) -> Result<(Segmentation, EvalReport)> {
    let seg = detect_simulated(sim, method, settings)?;
    let window = (settings.window as f64 / sim.spec.resolution as f64).round() as usize;
    let report = classify(&seg.change_points, &sim.true_cps, &MatchConfig { window })?;
    Ok((seg, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, Contrast, ScenarioSpec};

    #[test]
    fn high_contrast_accurate_finds_targets() {
        let sim = simulate(&ScenarioSpec::new(Contrast::High, 7)).unwrap();
        let (_, rep) = evaluate_simulated(&sim, Method::PiChange, &StudySettings::default()).unwrap();
        assert_eq!(rep.n_targets, 13);
        assert!(rep.counts.detected >= 12, "{:?}", rep.counts);
    }

    #[test]
    fn pelt_ignores_centers() {
        let sim = simulate(&ScenarioSpec::new(Contrast::Low, 3)).unwrap();
        let s = StudySettings::default();
        let a = detect_simulated(&sim, Method::Pelt, &s).unwrap();
        let mut moved = sim.clone();
        moved.prior_centers.iter_mut().for_each(|c| *c = 1);
        let b = detect_simulated(&moved, Method::Pelt, &s).unwrap();
        assert_eq!(a.change_points, b.change_points);
    }

    #[test]
    fn method_names_parse() {
        assert_eq!("pelt".parse::<Method>().unwrap(), Method::Pelt);
        assert_eq!("Pi-Change".parse::<Method>().unwrap(), Method::PiChange);
        assert!("bayes".parse::<Method>().is_err());
    }
}
