//! Time-varying change-point penalty built from prior centers.
//!
//! Each prior center contributes a Gaussian kernel `κ(t) = exp(-(t - c)² / 2σ²)`.
//! The kernels are combined with a noisy-OR complement
//! `S(t) = Π (1 - κ_i(t))`, which is 0 at every center and approaches 1 far
//! from all of them. The penalty charged for a change point at `t` is then
//! `g(t) = λ S(t) + β`, so it ranges over `[β, λ + β]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Gaussian kernel centered on a 1-based index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub center: usize,
    /// Standard deviation in index units.
    pub spread: f64,
}

impl KernelSpec {
    pub fn new(center: usize, spread: f64) -> Result<Self> {
        if center == 0 {
            return Err(Error::Range("kernel centers are 1-based".into()));
        }
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel spread must be positive and finite, got {spread}"
            )));
        }
        Ok(Self { center, spread })
    }

    /// Builds one kernel per center, all sharing `spread`.
    pub fn shared(centers: &[usize], spread: f64) -> Result<Vec<Self>> {
        centers.iter().map(|&c| Self::new(c, spread)).collect()
    }
}

pub fn kernel_value(spec: &KernelSpec, t: usize) -> f64 {
    let d = t as f64 - spec.center as f64;
    (-(d * d) / (2.0 * spec.spread * spec.spread)).exp()
}

pub fn support_complement(kernels: &[KernelSpec], t: usize) -> f64 {
    kernels
        .iter()
        .map(|k| {
            if k.center == t {
                0.0
            } else {
                1.0 - kernel_value(k, t)
            }
        })
        .product()
}

/// Dense per-index penalty together with the recipe that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyProfile {
    beta: f64,
    lambda: f64,
    kernels: Vec<KernelSpec>,
    support: Vec<f64>,
    g: Vec<f64>,
}

impl PenaltyProfile {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kernels(&self) -> &[KernelSpec] {
        &self.kernels
    }

    /// Number of indices covered.
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Penalty for a change point at 1-based index `t`.
    #[inline]
    pub fn g(&self, t: usize) -> f64 {
        self.g[t - 1]
    }

    /// Support complement `S(t)` at 1-based index `t`.
    pub fn support(&self, t: usize) -> f64 {
        self.support[t - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    /// The same profile with every penalty shifted by `delta`.
    ///
    /// The shifted values no longer follow `λ S + β` for the stored recipe
    /// unless `delta` is folded into β, which is what this does.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        build_profile(self.g.len(), &self.kernels, self.lambda, self.beta + delta)
    }
}

pub fn build_profile(
    n: usize,
    kernels: &[KernelSpec],
    lambda: f64,
    beta: f64,
) -> Result<PenaltyProfile> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    if n == 0 {
        return Err(Error::Length("penalty profile needs n >= 1".into()));
    }
    for k in kernels {
        if k.center == 0 || k.center > n {
            return Err(Error::Range(format!(
                "kernel center {} outside 1..={n}",
                k.center
            )));
        }
        if !(k.spread > 0.0 && k.spread.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel spread must be positive, got {}",
                k.spread
            )));
        }
    }
    let support: Vec<f64> = (1..=n).map(|t| support_complement(kernels, t)).collect();
    let g = support.iter().map(|s| lambda * s + beta).collect();
    Ok(PenaltyProfile {
        beta,
        lambda,
        kernels: kernels.to_vec(),
        support,
        g,
    })
}

/// Default prior strength: the maximum uplift equals the baseline penalty.
pub fn default_lambda(beta: f64) -> f64 {
    beta
}

/// Modified BIC baseline `(n_params + 2) · ln(n)`.
pub fn modified_bic_beta(n: usize, n_params: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "modified BIC needs n >= 2, got {n}"
        )));
    }
    Ok(mbic(n as f64, n_params))
}

fn mbic(n: f64, n_params: usize) -> f64 {
    (n_params as f64 + 2.0) * n.ln()
}

/// Baseline penalty as written in a recipe file: a number or `"mbic"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Value(f64),
    Rule(BetaRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaRule {
    Mbic,
}

/// Prior strength as written in a recipe file: a number or `"auto"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Rule(LambdaRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaRule {
    Auto,
}

/// A prior center given either as a 1-based index or a calendar date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterSpec {
    Index(usize),
    Date(String),
}

/// JSON penalty recipe:
/// `{"beta": 12.0 | "mbic", "lambda": 12.0 | "auto", "centers": [120, "2005-08-26"], "sigma": 30}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRecipe {
    pub beta: BetaSpec,
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub centers: Vec<CenterSpec>,
    pub sigma: f64,
}

impl PenaltyRecipe {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("penalty recipe: {e}")))
    }

    /// Resolves β, λ and every center against `series`.
    ///
    /// `n_params` is the per-segment parameter count used by the `"mbic"` rule.
    pub fn resolve(&self, series: &TimeSeries, n_params: usize) -> Result<PenaltyProfile> {
        let n = series.len();
        let beta = match self.beta {
            BetaSpec::Value(b) => b,
            BetaSpec::Rule(BetaRule::Mbic) => modified_bic_beta(n, n_params)?,
        };
        let lambda = match self.lambda {
            LambdaSpec::Value(l) => l,
            LambdaSpec::Rule(LambdaRule::Auto) => default_lambda(beta),
        };
        let mut kernels = Vec::with_capacity(self.centers.len());
        for c in &self.centers {
            let center = match c {
                CenterSpec::Index(i) => *i,
                CenterSpec::Date(d) => {
                    let instant = crate::ingest::parse_instant(d, None)?;
                    series.index_of_timestamp(instant).map_err(|e| match e {
                        Error::Range(msg) => Error::Range(format!("center date {d}: {msg}")),
                        other => other,
                    })?
                }
            };
            kernels.push(KernelSpec::new(center, self.sigma)?);
        }
        build_profile(n, &kernels, lambda, beta)
    }
}
