//! Offline change-point detection with a prior-informed penalty.
//!
//! The detector minimises a penalised segmentation cost where the per-change
//! penalty dips near user-supplied prior locations. Search is exact dynamic
//! programming with optional candidate pruning.
//!
//! Indices are 1-based throughout: a change point `t` ends a segment at
//! observation `t`, and the next segment starts at `t + 1`.
//!
//! ```
//! use pichange::{detect, CostModel, DetectorConfig, TimeSeries, build_profile, modified_bic_beta};
//!
//! let mut values = vec![0.0; 40];
//! values[20..].iter_mut().for_each(|v| *v = 5.0);
//! for (i, v) in values.iter_mut().enumerate() {
//!     *v += ((i * 7919) % 13) as f64 / 13.0 - 0.5;
//! }
//! let series = TimeSeries::new(values).unwrap();
//! let beta = modified_bic_beta(series.len(), 2).unwrap();
//! let penalty = build_profile(series.len(), &[], 0.0, beta).unwrap();
//! let seg = detect(&series, &DetectorConfig::new(CostModel::GaussianNll, penalty)).unwrap();
//! assert_eq!(seg.change_points, vec![20]);
//! ```

pub mod cost;
pub mod detector;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod ingest;
pub mod penalty;
pub mod series;
pub mod simulate;

pub use cost::{estimate_shape, CostCache, CostModel};
pub use detector::{
    detect, detect_with_cache, objective_value, objective_with_cache, solve, DetectorConfig,
};
pub use error::{Error, Result};
pub use experiment::{detect_simulated, evaluate_simulated, Method, StudySettings};
pub use evaluate::{classify, error_stats, EvalReport, MatchConfig, OutcomeCounts};
pub use ingest::{load_csv, parse_instant, resolve_centers, write_csv, ColumnRef, ColumnSpec, Transform};
pub use penalty::{build_profile, default_lambda, modified_bic_beta, KernelSpec, PenaltyProfile, PenaltyRecipe};
pub use series::{Segmentation, TimeSeries};
pub use simulate::{simulate, Contrast, PriorMode, ScenarioSpec, SimulatedSeries};
