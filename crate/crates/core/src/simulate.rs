//! Actigraphy-like zero-augmented Gamma series over repeated sleep-wake cycles.
//!
//! Each cycle concatenates two diurnal segments (`S1`, `S2`) and one
//! nocturnal segment (`S3`). The `S1 -> S2` boundary is a within-day change,
//! `S2 -> S3` is a sleep onset and `S3 -> next S1` a wake onset. The wake
//! onset after the final cycle is never observed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZagParams {
    pub shape: f64,
    /// Gamma scale, the positive part has mean `shape * scale`.
    pub scale: f64,
    pub zero_prob: f64,
}

impl ZagParams {
    pub fn new(shape: f64, scale: f64, zero_prob: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0) {
            return Err(Error::Domain(format!(
                "shape and scale must be positive, got {shape} and {scale}"
            )));
        }
        if !(0.0..1.0).contains(&zero_prob) {
            return Err(Error::Domain(format!(
                "zero probability must lie in [0, 1), got {zero_prob}"
            )));
        }
        Ok(Self {
            shape,
            scale,
            zero_prob,
        })
    }
}

/// Draws `n` values: 0 with probability `p`, otherwise `Gamma(ξ, θ)`.
pub fn sample_zag<R: Rng + ?Sized>(params: &ZagParams, n: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(params.shape, params.scale).expect("validated gamma parameters");
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < params.zero_prob {
                return 0.0;
            }
            loop {
                let v: f64 = gamma.sample(rng);
                if v > 0.0 {
                    return v;
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contrast {
    Low,
    Moderate,
    High,
}

impl Contrast {
    pub const ALL: [Contrast; 3] = [Contrast::Low, Contrast::Moderate, Contrast::High];

    /// Inclusive integer grid for the diurnal scale `θ_D`.
    pub fn day_scale_grid(self) -> (u32, u32) {
        match self {
            Contrast::Low => (110, 170),
            Contrast::Moderate => (190, 280),
            Contrast::High => (320, 450),
        }
    }

    /// Inclusive integer grid for the nocturnal scale `θ_N`.
    pub fn night_scale_grid(self) -> (u32, u32) {
        match self {
            Contrast::Low => (85, 125),
            Contrast::Moderate => (55, 80),
            Contrast::High => (35, 50),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Contrast::Low => "Low",
            Contrast::Moderate => "Moderate",
            Contrast::High => "High",
        }
    }
}

impl std::str::FromStr for Contrast {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Contrast::Low),
            "moderate" => Ok(Contrast::Moderate),
            "high" => Ok(Contrast::High),
            other => Err(Error::Config(format!("unknown contrast '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// Centers within 9 minutes of the truth.
    Accurate,
    /// Centers displaced by 60 to 120 minutes in a random direction.
    Inaccurate,
    /// Centers exactly on the truth.
    Exact,
}

impl std::str::FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accurate" => Ok(PriorMode::Accurate),
            "inaccurate" => Ok(PriorMode::Inaccurate),
            "exact" => Ok(PriorMode::Exact),
            other => Err(Error::Config(format!("unknown prior mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub contrast: Contrast,
    pub n_cycles: usize,
    /// Master seed of the experiment.
    pub seed: u64,
    /// Position of this series within the experiment; selects the RNG stream.
    #[serde(default)]
    pub series_index: u64,
    pub prior_mode: PriorMode,
    /// Minutes per index.
    pub resolution: u32,
}

impl ScenarioSpec {
    pub fn new(contrast: Contrast, seed: u64) -> Self {
        Self {
            contrast,
            n_cycles: 7,
            seed,
            series_index: 0,
            prior_mode: PriorMode::Accurate,
            resolution: 1,
        }
    }

    pub fn with_series_index(mut self, i: u64) -> Self {
        self.series_index = i;
        self
    }

    pub fn with_prior_mode(mut self, mode: PriorMode) -> Self {
        self.prior_mode = mode;
        self
    }

    pub fn with_cycles(mut self, n: usize) -> Self {
        self.n_cycles = n;
        self
    }

    pub fn with_resolution(mut self, minutes: u32) -> Self {
        self.resolution = minutes;
        self
    }

    /// Generator for the observations. It does not depend on the prior mode,
    /// so every mode sees the same data for a given seed and index.
    pub fn data_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(2 * self.series_index);
        rng
    }

    /// Generator for prior-center placement.
    pub fn centers_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(2 * self.series_index + 1);
        rng
    }

    fn validate(&self) -> Result<()> {
        if self.n_cycles == 0 {
            return Err(Error::Config("n_cycles must be >= 1".into()));
        }
        if self.resolution == 0 {
            return Err(Error::Config("resolution must be >= 1 minute".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CpLabel {
    WithinDay,
    SleepOnset,
    WakeOnset,
}

impl CpLabel {
    /// Sleep and wake onsets are the change points worth recovering.
    pub fn is_target(self) -> bool {
        !matches!(self, CpLabel::WithinDay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCp {
    pub index: usize,
    pub label: CpLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    S1,
    S2,
    S3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub cycle: usize,
    pub kind: SegmentKind,
    /// 1-based inclusive range.
    pub start: usize,
    pub end: usize,
    pub params: ZagParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSeries {
    pub series: TimeSeries,
    pub true_cps: Vec<LabeledCp>,
    pub prior_centers: Vec<usize>,
    pub params_log: Vec<SegmentRecord>,
    pub spec: ScenarioSpec,
}

impl SimulatedSeries {
    pub fn shape(&self) -> f64 {
        self.params_log[0].params.shape
    }

    pub fn targets(&self) -> impl Iterator<Item = &LabeledCp> {
        self.true_cps.iter().filter(|c| c.label.is_target())
    }
}

fn grid<R: Rng + ?Sized>(rng: &mut R, lo: u32, hi: u32) -> u32 {
    rng.random_range(lo..=hi)
}

fn minutes_to_index(minutes: u32, resolution: u32) -> usize {
    ((minutes as f64 / resolution as f64).round() as usize).max(1)
}

/// Samples the observations and truth labels for one series.
pub fn generate_series<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<SimulatedSeries> {
    spec.validate()?;
    let shape = grid(rng, 50, 130) as f64 / 100.0;
    let (day_lo, day_hi) = spec.contrast.day_scale_grid();
    let (night_lo, night_hi) = spec.contrast.night_scale_grid();

    let mut values = Vec::new();
    let mut true_cps = Vec::new();
    let mut params_log = Vec::new();
    for cycle in 0..spec.n_cycles {
        for kind in [SegmentKind::S1, SegmentKind::S2, SegmentKind::S3] {
            let minutes = 240 + 10 * grid(rng, 0, 24);
            let len = minutes_to_index(minutes, spec.resolution);
            let (zero_prob, scale) = match kind {
                SegmentKind::S1 | SegmentKind::S2 => (
                    grid(rng, 5, 45) as f64 / 100.0,
                    grid(rng, day_lo, day_hi) as f64,
                ),
                SegmentKind::S3 => (
                    grid(rng, 55, 95) as f64 / 100.0,
                    grid(rng, night_lo, night_hi) as f64,
                ),
            };
            let params = ZagParams::new(shape, scale, zero_prob)?;
            let start = values.len() + 1;
            if start > 1 {
                let label = match kind {
                    SegmentKind::S1 => CpLabel::WakeOnset,
                    SegmentKind::S2 => CpLabel::WithinDay,
                    SegmentKind::S3 => CpLabel::SleepOnset,
                };
                true_cps.push(LabeledCp {
                    index: start - 1,
                    label,
                });
            }
            values.extend(sample_zag(&params, len, rng));
            params_log.push(SegmentRecord {
                cycle,
                kind,
                start,
                end: values.len(),
                params,
            });
        }
    }
    let series = TimeSeries::new(values)?.with_unit_label(if spec.resolution == 1 {
        "minutes".to_string()
    } else {
        format!("{} minutes", spec.resolution)
    });
    let mut centers_rng = spec.centers_rng();
    let prior_centers = place_prior_centers(
        &true_cps,
        spec.prior_mode,
        series.len(),
        spec.resolution,
        &mut centers_rng,
    )?;
    Ok(SimulatedSeries {
        series,
        true_cps,
        prior_centers,
        params_log,
        spec: spec.clone(),
    })
}

/// Generates a series from the spec's own seed and stream.
pub fn simulate(spec: &ScenarioSpec) -> Result<SimulatedSeries> {
    generate_series(spec, &mut spec.data_rng())
}

/// One center per sleep or wake onset, perturbed according to `mode` and
/// clamped to `1..=n`. Offsets are drawn in minutes.
pub fn place_prior_centers<R: Rng + ?Sized>(
    true_cps: &[LabeledCp],
    mode: PriorMode,
    n: usize,
    resolution: u32,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if true_cps.is_empty() {
        return Err(Error::Validation("no true change points to center on".into()));
    }
    let res = resolution.max(1) as f64;
    let centers = true_cps
        .iter()
        .filter(|cp| cp.label.is_target())
        .map(|cp| {
            let minutes: i64 = match mode {
                PriorMode::Exact => 0,
                PriorMode::Accurate => rng.random_range(-9..=9),
                PriorMode::Inaccurate => {
                    let d: i64 = rng.random_range(60..=120);
                    if rng.random_bool(0.5) {
                        d
                    } else {
                        -d
                    }
                }
            };
            let offset = (minutes as f64 / res).round() as i64;
            (cp.index as i64 + offset).clamp(1, n as i64) as usize
        })
        .collect();
    Ok(centers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(s: &SimulatedSeries, label: CpLabel) -> usize {
        s.true_cps.iter().filter(|c| c.label == label).count()
    }

    #[test]
    fn zag_sampler_without_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ZagParams::new(0.7, 50.0, 0.0).unwrap();
        let y = sample_zag(&p, 10_000, &mut rng);
        assert!(y.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zag_sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ZagParams::new(1.0, 100.0, 0.6).unwrap();
        let y = sample_zag(&p, 100_000, &mut rng);
        let zeros = y.iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.6).abs() < 0.01, "zero fraction {zeros}");

        let p = ZagParams::new(1.0, 100.0, 0.0).unwrap();
        let y = sample_zag(&p, 100_000, &mut rng);
        let mean = y.iter().sum::<f64>() / 1e5;
        assert!((mean - 100.0).abs() < 3.0, "positive mean {mean}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ZagParams::new(0.0, 1.0, 0.1).is_err());
        assert!(ZagParams::new(1.0, 1.0, 1.0).is_err());
        assert!(ZagParams::new(1.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn seven_cycle_structure() {
        for (i, contrast) in Contrast::ALL.into_iter().enumerate() {
            let s = simulate(&ScenarioSpec::new(contrast, 40 + i as u64)).unwrap();
            assert_eq!(count(&s, CpLabel::WithinDay), 7);
            assert_eq!(count(&s, CpLabel::SleepOnset), 7);
            assert_eq!(count(&s, CpLabel::WakeOnset), 6);
            assert_eq!(s.prior_centers.len(), 13);
            assert_eq!(s.params_log.len(), 21);
            assert!((5040..=10080).contains(&s.series.len()));
            for r in &s.params_log {
                let len = r.end - r.start + 1;
                assert!((240..=480).contains(&len));
                assert_eq!((len - 240) % 10, 0);
            }
        }
    }

    #[test]
    fn parameters_lie_on_their_grids() {
        for seed in 0..20 {
            let s = simulate(&ScenarioSpec::new(Contrast::High, seed)).unwrap();
            let xi = s.shape();
            assert!((0.5..=1.3).contains(&xi));
            assert!(((xi * 100.0).round() - xi * 100.0).abs() < 1e-9);
            for r in &s.params_log {
                assert_eq!(r.params.shape, xi);
                let p = r.params.zero_prob;
                assert!(((p * 100.0).round() - p * 100.0).abs() < 1e-9);
                assert_eq!(r.params.scale.fract(), 0.0);
                match r.kind {
                    SegmentKind::S3 => {
                        assert!(p > 0.5 && (0.55..=0.95).contains(&p));
                        assert!((35.0..=50.0).contains(&r.params.scale));
                    }
                    _ => {
                        assert!(p < 0.5 && (0.05..=0.45).contains(&p));
                        assert!((320.0..=450.0).contains(&r.params.scale));
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_series() {
        let spec = ScenarioSpec::new(Contrast::Low, 99).with_series_index(3);
        assert_eq!(simulate(&spec).unwrap(), simulate(&spec).unwrap());
        let other = simulate(&spec.clone().with_series_index(4)).unwrap();
        assert_ne!(simulate(&spec).unwrap().series, other.series);
    }

    #[test]
    fn prior_mode_does_not_change_the_data() {
        let spec = ScenarioSpec::new(Contrast::Moderate, 5);
        let a = simulate(&spec).unwrap();
        let b = simulate(&spec.clone().with_prior_mode(PriorMode::Inaccurate)).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.true_cps, b.true_cps);
    }

    #[test]
    fn center_offsets_by_mode() {
        for seed in 0..10 {
            let spec = ScenarioSpec::new(Contrast::Low, seed);
            let s = simulate(&spec).unwrap();
            let targets: Vec<usize> = s.targets().map(|c| c.index).collect();
            for (c, t) in s.prior_centers.iter().zip(&targets) {
                assert!(c.abs_diff(*t) <= 9);
            }
            let s = simulate(&spec.clone().with_prior_mode(PriorMode::Inaccurate)).unwrap();
            for (c, t) in s.prior_centers.iter().zip(&targets) {
                let d = c.abs_diff(*t);
                assert!((60..=120).contains(&d), "offset {d}");
            }
            let s = simulate(&spec.clone().with_prior_mode(PriorMode::Exact)).unwrap();
            assert_eq!(s.prior_centers, targets);
        }
    }

    #[test]
    fn single_cycle_has_two_change_points() {
        let s = simulate(&ScenarioSpec::new(Contrast::High, 1).with_cycles(1)).unwrap();
        let labels: Vec<CpLabel> = s.true_cps.iter().map(|c| c.label).collect();
        assert_eq!(labels, vec![CpLabel::WithinDay, CpLabel::SleepOnset]);
    }

    #[test]
    fn long_segments_refit_to_their_parameters() {
        // moment refit of p and the positive mean on each logged segment
        let s = simulate(&ScenarioSpec::new(Contrast::High, 12)).unwrap();
        let y = s.series.values();
        for r in &s.params_log {
            let seg = &y[r.start - 1..r.end];
            let n = seg.len() as f64;
            let pos: Vec<f64> = seg.iter().copied().filter(|&v| v > 0.0).collect();
            let p_hat = 1.0 - pos.len() as f64 / n;
            let p = r.params.zero_prob;
            assert!((p_hat - p).abs() < 4.0 * (p * (1.0 - p) / n).sqrt() + 1e-9);
            let m = pos.len() as f64;
            let mean_hat = pos.iter().sum::<f64>() / m;
            let mean = r.params.shape * r.params.scale;
            let sd = (r.params.shape).sqrt() * r.params.scale / m.sqrt();
            assert!((mean_hat - mean).abs() < 4.5 * sd, "{mean_hat} vs {mean}");
        }
    }

    #[test]
    fn resolution_rescales_lengths() {
        let mut spec = ScenarioSpec::new(Contrast::Low, 3);
        spec.resolution = 10;
        let s = simulate(&spec).unwrap();
        for r in &s.params_log {
            assert!((24..=48).contains(&(r.end - r.start + 1)));
        }
    }
}
