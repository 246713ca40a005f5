//! Segment costs as negative log-likelihoods at the segment MLEs.
//!
//! Every cost is evaluated in O(1) from prefix statistics built once per
//! series. Both models fit their segment parameters under the same box
//! constraints on every segment (variance floor for the Gaussian, clamps on
//! `p` and `θ` for the zero-augmented Gamma), so the NLL of a split never
//! exceeds the NLL of the merged segment. That is the condition the pruning
//! rule needs with `K = 0`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Relative variance floor for the Gaussian model.
pub const VAR_FLOOR_REL: f64 = 1e-8;
/// Lower bound on the whole-series variance used to scale the floor.
pub const VAR_FLOOR_MIN: f64 = 1e-12;
/// Lower bound on the fitted Gamma scale.
pub const THETA_FLOOR: f64 = 1e-12;
/// Zero-probability estimates are clamped to `[EPS_P, 1 - EPS_P]`.
pub const EPS_P: f64 = 1e-6;
/// Bounds applied to the moment estimate of the Gamma shape.
pub const SHAPE_BOUNDS: (f64, f64) = (0.01, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostModel {
    /// Normal likelihood with mean and variance fitted per segment.
    GaussianNll,
    /// Zero-augmented Gamma: `p` and `θ` fitted per segment, shape `ξ` shared.
    ZagNll,
}

impl CostModel {
    /// Smallest segment for which the cost is defined.
    pub fn min_segment_len(self) -> usize {
        match self {
            CostModel::GaussianNll => 2,
            CostModel::ZagNll => 1,
        }
    }

    /// Free parameters per segment, as counted by the modified BIC rule.
    pub fn params_per_segment(self) -> usize {
        2
    }

    pub fn name(self) -> &'static str {
        match self {
            CostModel::GaussianNll => "gaussian",
            CostModel::ZagNll => "zag",
        }
    }
}

/// Running sum with Neumaier compensation.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn prefix<I: Iterator<Item = f64>>(n: usize, it: I) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = CompensatedSum::default();
    for x in it {
        acc.add(x);
        out.push(acc.value());
    }
    out
}

/// Unevaluated sum `hi + lo` carrying roughly twice the precision of `f64`.
///
/// Segment variances come from differences of prefix sums; near the variance
/// floor plain `f64` cancellation noise is large compared with the floor.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd {
        hi: s,
        lo: (a - (s - bb)) + (b - bb),
    }
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn square(x: f64) -> Self {
        let p = x * x;
        Dd {
            hi: p,
            lo: x.mul_add(x, -p),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(r.hi, r.lo + t.lo)
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(Dd { hi: -o.hi, lo: -o.lo })
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p) + (self.hi * o.lo + self.lo * o.hi);
        quick_two_sum(p, e)
    }

    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let r = self.sub(Dd::from_f64(b).mul(Dd::from_f64(q1)));
        quick_two_sum(q1, r.hi / b)
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

fn prefix_dd<I: Iterator<Item = Dd>>(n: usize, it: I) -> Vec<Dd> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = Dd::default();
    out.push(acc);
    for x in it {
        acc = acc.add(x);
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone)]
enum Stats {
    Gaussian {
        /// Shift subtracted before squaring, the whole-series mean.
        shift: f64,
        cum_dev: Vec<Dd>,
        cum_dev_sq: Vec<Dd>,
        var_floor: f64,
    },
    Zag {
        cum_zero_count: Vec<usize>,
        cum_log_pos: Vec<f64>,
        shape: f64,
        ln_gamma_shape: f64,
    },
}

/// Prefix statistics for O(1) segment costs.
#[derive(Debug, Clone)]
pub struct CostCache {
    model: CostModel,
    n: usize,
    cum_sum: Vec<f64>,
    stats: Stats,
}

impl CostCache {
    /// Builds the cache. Under the ZAG model a missing `shape` is estimated
    /// from the positive values with [`estimate_shape`].
    pub fn build(series: &TimeSeries, model: CostModel, shape: Option<f64>) -> Result<Self> {
        let y = series.values();
        let n = y.len();
        let cum_sum = prefix(n, y.iter().copied());
        let stats = match model {
            CostModel::GaussianNll => {
                let shift = cum_sum[n] / n as f64;
                let cum_dev = prefix_dd(n, y.iter().map(|v| Dd::from_f64(v - shift)));
                let cum_dev_sq = prefix_dd(n, y.iter().map(|v| Dd::square(v - shift)));
                let whole_var = (cum_dev_sq[n].value() / n as f64).max(VAR_FLOOR_MIN);
                Stats::Gaussian {
                    shift,
                    cum_dev,
                    cum_dev_sq,
                    var_floor: VAR_FLOOR_REL * whole_var,
                }
            }
            CostModel::ZagNll => {
                if let Some(i) = y.iter().position(|&v| v < 0.0) {
                    return Err(Error::Domain(format!(
                        "ZAG cost needs nonnegative values; index {} is {}",
                        i + 1,
                        y[i]
                    )));
                }
                let shape = match shape {
                    Some(s) if s > 0.0 && s.is_finite() => s,
                    Some(s) => {
                        return Err(Error::Domain(format!("shape must be positive, got {s}")))
                    }
                    None => estimate_shape(series)?,
                };
                let mut cum_zero_count = Vec::with_capacity(n + 1);
                cum_zero_count.push(0);
                let mut zeros = 0;
                for &v in y {
                    if v == 0.0 {
                        zeros += 1;
                    }
                    cum_zero_count.push(zeros);
                }
                let cum_log_pos = prefix(n, y.iter().map(|&v| if v > 0.0 { v.ln() } else { 0.0 }));
                Stats::Zag {
                    cum_zero_count,
                    cum_log_pos,
                    shape,
                    ln_gamma_shape: ln_gamma(shape),
                }
            }
        };
        Ok(Self {
            model,
            n,
            cum_sum,
            stats,
        })
    }

    pub fn model(&self) -> CostModel {
        self.model
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Prefix sums of the raw values, `cum_sum[0] = 0`.
    pub fn cum_sum(&self) -> &[f64] {
        &self.cum_sum
    }

    pub fn cum_zero_count(&self) -> Option<&[usize]> {
        match &self.stats {
            Stats::Zag { cum_zero_count, .. } => Some(cum_zero_count),
            Stats::Gaussian { .. } => None,
        }
    }

    pub fn cum_log_pos(&self) -> Option<&[f64]> {
        match &self.stats {
            Stats::Zag { cum_log_pos, .. } => Some(cum_log_pos),
            Stats::Gaussian { .. } => None,
        }
    }

    /// Prefix sums of squared deviations from [`CostCache::gaussian_shift`].
    pub fn cum_sumsq(&self) -> Option<Vec<f64>> {
        match &self.stats {
            Stats::Gaussian { cum_dev_sq, .. } => Some(cum_dev_sq.iter().map(|d| d.value()).collect()),
            Stats::Zag { .. } => None,
        }
    }

    pub fn gaussian_shift(&self) -> Option<f64> {
        match &self.stats {
            Stats::Gaussian { shift, .. } => Some(*shift),
            Stats::Zag { .. } => None,
        }
    }

    pub fn var_floor(&self) -> Option<f64> {
        match &self.stats {
            Stats::Gaussian { var_floor, .. } => Some(*var_floor),
            Stats::Zag { .. } => None,
        }
    }

    pub fn shape(&self) -> Option<f64> {
        match &self.stats {
            Stats::Zag { shape, .. } => Some(*shape),
            Stats::Gaussian { .. } => None,
        }
    }

    /// Sum of `y_s..=y_t` (1-based, inclusive).
    pub fn segment_sum(&self, s: usize, t: usize) -> f64 {
        self.cum_sum[t] - self.cum_sum[s - 1]
    }

    /// Checked cost of the 1-based inclusive segment `y_s..=y_t`.
    pub fn segment_cost(&self, s: usize, t: usize) -> Result<f64> {
        if s == 0 || s > t || t > self.n {
            return Err(Error::Range(format!(
                "segment [{s}, {t}] is not within 1..={}",
                self.n
            )));
        }
        let len = t - s + 1;
        if len < self.model.min_segment_len() {
            return Err(Error::Length(format!(
                "{} cost needs segments of length >= {}, got {len}",
                self.model.name(),
                self.model.min_segment_len()
            )));
        }
        Ok(self.cost(s, t))
    }

    /// Unchecked cost of `y_s..=y_t`; the caller guarantees a valid range.
    #[inline]
    pub fn cost(&self, s: usize, t: usize) -> f64 {
        debug_assert!(s >= 1 && s <= t && t <= self.n);
        let n = (t - s + 1) as f64;
        match &self.stats {
            Stats::Gaussian {
                cum_dev,
                cum_dev_sq,
                var_floor,
                ..
            } => {
                let sum = cum_dev[t].sub(cum_dev[s - 1]);
                let sum_sq = cum_dev_sq[t].sub(cum_dev_sq[s - 1]);
                let centered = sum_sq.sub(sum.mul(sum).div_f64(n));
                let var = (centered.value() / n).max(0.0);
                if var >= *var_floor {
                    0.5 * n * var.ln() + 0.5 * n
                } else {
                    // NLL at the constrained optimum sigma^2 = floor
                    0.5 * n * var_floor.ln() + 0.5 * n * var / var_floor
                }
            }
            Stats::Zag {
                cum_zero_count,
                cum_log_pos,
                shape,
                ln_gamma_shape,
            } => {
                let n0 = (cum_zero_count[t] - cum_zero_count[s - 1]) as f64;
                let n1 = n - n0;
                let p = (n0 / n).clamp(EPS_P, 1.0 - EPS_P);
                let mut cost = -(n0 * p.ln() + n1 * (1.0 - p).ln());
                if n1 > 0.0 {
                    let sum_pos = self.cum_sum[t] - self.cum_sum[s - 1];
                    let sum_log = cum_log_pos[t] - cum_log_pos[s - 1];
                    let theta = (sum_pos / n1 / shape).max(THETA_FLOOR);
                    cost += n1 * (ln_gamma_shape + shape * theta.ln()) - (shape - 1.0) * sum_log
                        + sum_pos / theta;
                }
                cost
            }
        }
    }
}

/// Gaussian NLL of `y_s..=y_t`; errors unless the cache is Gaussian and `t - s + 1 >= 2`.
pub fn gaussian_segment_cost(cache: &CostCache, s: usize, t: usize) -> Result<f64> {
    if cache.model() != CostModel::GaussianNll {
        return Err(Error::Config("cache was not built for the Gaussian model".into()));
    }
    cache.segment_cost(s, t)
}

/// Zero-augmented Gamma NLL of `y_s..=y_t`.
pub fn zag_segment_cost(cache: &CostCache, s: usize, t: usize) -> Result<f64> {
    if cache.model() != CostModel::ZagNll {
        return Err(Error::Config("cache was not built for the ZAG model".into()));
    }
    cache.segment_cost(s, t)
}

/// Method-of-moments Gamma shape over the positive values:
/// `mean² / var` with the unbiased variance, clamped to [`SHAPE_BOUNDS`].
pub fn estimate_shape(series: &TimeSeries) -> Result<f64> {
    let pos: Vec<f64> = series.values().iter().copied().filter(|&v| v > 0.0).collect();
    if pos.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "shape estimation needs >= 2 positive values, found {}",
            pos.len()
        )));
    }
    let n = pos.len() as f64;
    let mean = pos.iter().sum::<f64>() / n;
    let var = pos.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let (lo, hi) = SHAPE_BOUNDS;
    if var <= 0.0 {
        return Ok(hi);
    }
    Ok((mean * mean / var).clamp(lo, hi))
}
