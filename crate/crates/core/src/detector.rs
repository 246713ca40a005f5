//! Exact penalized segmentation with a location-dependent change-point penalty.
//!
//! The objective for change points `τ_1 < ... < τ_m` is
//!
//! ```text
//! Q(τ) = Σ_{j=1..m} [ C(y_{τ_{j-1}+1 ..= τ_j}) + g(τ_j) ] + C(y_{τ_m+1 ..= N})
//! ```
//!
//! and is minimized by optimal partitioning,
//! `F(s) = min_t { F(t) + C(y_{t+1..=s}) + g(t) }` with `F(0) = 0` and no
//! penalty on the `t = 0` branch. A candidate `t` is pruned at `s` when
//! `F(t) + C(y_{t+1..=s}) + g(t) + K >= F(s) + g(s)`; with a subadditive cost
//! and `K <= 0` it can then never be the optimal last change point again.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cost::{CostCache, CostModel};
use crate::error::{Error, Result};
use crate::penalty::PenaltyProfile;
use crate::series::{segment_bounds, Segmentation, TimeSeries};

/// Relative slack below which a pruning inequality is not trusted.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub cost_model: CostModel,
    pub penalty: PenaltyProfile,
    /// Requested minimum segment length `L_min >= 1`.
    pub min_segment_length: usize,
    /// Pruning constant `K`.
    pub pruning_constant: f64,
    pub pruning_enabled: bool,
    /// Shared Gamma shape for the ZAG model; estimated when absent.
    pub shape: Option<f64>,
}

impl DetectorConfig {
    pub fn new(cost_model: CostModel, penalty: PenaltyProfile) -> Self {
        Self {
            cost_model,
            penalty,
            min_segment_length: 1,
            pruning_constant: 0.0,
            pruning_enabled: true,
            shape: None,
        }
    }

    pub fn with_min_segment_length(mut self, l: usize) -> Self {
        self.min_segment_length = l;
        self
    }

    pub fn with_pruning(mut self, enabled: bool) -> Self {
        self.pruning_enabled = enabled;
        self
    }

    pub fn with_pruning_constant(mut self, k: f64) -> Self {
        self.pruning_constant = k;
        self
    }

    pub fn with_shape(mut self, shape: f64) -> Self {
        self.shape = Some(shape);
        self
    }

    pub fn with_penalty(mut self, penalty: PenaltyProfile) -> Self {
        self.penalty = penalty;
        self
    }

    /// Minimum segment length actually enforced: the requested one, raised to
    /// the smallest segment the cost model can fit.
    pub fn effective_min_segment_length(&self) -> usize {
        self.min_segment_length.max(self.cost_model.min_segment_len())
    }

    /// Both built-in costs are subadditive, which certifies every `K <= 0`.
    pub fn is_pruning_certified(&self) -> bool {
        self.pruning_constant <= 0.0
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.min_segment_length == 0 {
            return Err(Error::Config("minimum segment length must be >= 1".into()));
        }
        if !self.pruning_constant.is_finite() {
            return Err(Error::Config("pruning constant must be finite".into()));
        }
        if self.penalty.len() != n {
            return Err(Error::Config(format!(
                "penalty profile covers {} indices but the series has {n}",
                self.penalty.len()
            )));
        }
        let l = self.effective_min_segment_length();
        if n < 2 * l {
            return Err(Error::Length(format!(
                "series of length {n} is shorter than 2 x minimum segment length {l}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: usize,
    /// Step at which a pruned candidate leaves the set. Removal waits until
    /// the pruning index `s` is itself admissible as a last change point.
    pub expires_at: Option<usize>,
    /// `F(t) + C(y_{t+1..=s}) + g(t)` at the most recent step.
    value: f64,
}

/// Dynamic-programming state over prefixes `y_1..=y_s`.
#[derive(Debug, Clone)]
pub struct DpState {
    /// Optimal prefix objectives, `f[0] = 0`, infinite where unreachable.
    pub f: Vec<f64>,
    /// Optimal last change point of each prefix (0 for none).
    pub last_cp: Vec<usize>,
    /// Number of change points in the optimal prefix segmentation.
    pub num_cps: Vec<usize>,
    pub candidates: Vec<Candidate>,
    /// Total number of segment-cost evaluations in the minimization.
    pub cost_evaluations: u64,
    min_len: usize,
}

impl DpState {
    pub fn new(n: usize, min_len: usize) -> Self {
        let mut f = vec![f64::INFINITY; n + 1];
        f[0] = 0.0;
        Self {
            f,
            last_cp: vec![0; n + 1],
            num_cps: vec![0; n + 1],
            candidates: Vec::new(),
            cost_evaluations: 0,
            min_len,
        }
    }

    /// Change points of the optimal segmentation of `y_1..=s`, ascending.
    pub fn backtrack(&self, s: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_cps[s]);
        let mut t = self.last_cp[s];
        while t > 0 {
            out.push(t);
            t = self.last_cp[t];
        }
        out.reverse();
        out
    }

    pub fn candidate_indices(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.index).collect()
    }

    fn path_through(&self, t: usize) -> Vec<usize> {
        let mut p = self.backtrack(t);
        if t > 0 {
            p.push(t);
        }
        p
    }

    /// Orders "last change point t1" against "last change point t2" when
    /// both reach the same objective: fewer change points first, then the
    /// lexicographically smaller sequence.
    fn tie_break(&self, t1: usize, t2: usize) -> Ordering {
        let c1 = if t1 == 0 { 0 } else { self.num_cps[t1] + 1 };
        let c2 = if t2 == 0 { 0 } else { self.num_cps[t2] + 1 };
        c1.cmp(&c2)
            .then_with(|| self.path_through(t1).cmp(&self.path_through(t2)))
    }
}

#[inline]
fn penalty_at(profile: &PenaltyProfile, t: usize) -> f64 {
    if t == 0 {
        0.0
    } else {
        profile.g(t)
    }
}

/// Computes `F(s)` over the current candidate set, admitting `s - L_min`
/// first when it is a feasible last change point.
pub fn evaluate_step(state: &mut DpState, s: usize, cache: &CostCache, config: &DetectorConfig) {
    let l = state.min_len;
    if s < l {
        return;
    }
    let newcomer = s - l;
    if newcomer == 0 || newcomer >= l {
        state.candidates.push(Candidate {
            index: newcomer,
            expires_at: None,
            value: f64::INFINITY,
        });
    }
    state
        .candidates
        .retain(|c| c.expires_at.is_none_or(|e| e > s));

    let mut best: Option<(usize, f64)> = None;
    for i in 0..state.candidates.len() {
        let t = state.candidates[i].index;
        let v = state.f[t] + cache.cost(t + 1, s) + penalty_at(&config.penalty, t);
        state.candidates[i].value = v;
        state.cost_evaluations += 1;
        best = match best {
            None => Some((t, v)),
            Some((bt, bv)) => {
                if v < bv || (v == bv && state.tie_break(t, bt) == Ordering::Less) {
                    Some((t, v))
                } else {
                    Some((bt, bv))
                }
            }
        };
    }
    if let Some((t, v)) = best {
        state.f[s] = v;
        state.last_cp[s] = t;
        state.num_cps[s] = if t == 0 { 0 } else { state.num_cps[t] + 1 };
    }
}

/// Flags every candidate `t` with
/// `F(t) + C(y_{t+1..=s}) + g(t) + K >= F(s) + g(s)` for removal once `s`
/// becomes an admissible last change point. Index 0 uses `g(0) = 0`.
pub fn prune_step(state: &mut DpState, s: usize, config: &DetectorConfig) {
    if !state.f[s].is_finite() || s >= config.penalty.len() {
        return;
    }
    let rhs = state.f[s] + config.penalty.g(s);
    let k = config.pruning_constant;
    let expiry = s + state.min_len;
    for c in state.candidates.iter_mut() {
        if c.expires_at.is_some() || !c.value.is_finite() {
            continue;
        }
        let lhs = c.value + k;
        let slack = PRUNE_TOL * (1.0 + lhs.abs() + rhs.abs());
        if lhs - rhs > slack {
            c.expires_at = Some(expiry);
        }
    }
}

/// Runs the full recursion and returns the final state.
pub fn solve(cache: &CostCache, config: &DetectorConfig) -> Result<DpState> {
    let n = cache.len();
    if cache.model() != config.cost_model {
        return Err(Error::Config(format!(
            "cost cache is {} but the config asks for {}",
            cache.model().name(),
            config.cost_model.name()
        )));
    }
    config.validate(n)?;
    let mut state = DpState::new(n, config.effective_min_segment_length());
    for s in 1..=n {
        evaluate_step(&mut state, s, cache, config);
        if config.pruning_enabled {
            prune_step(&mut state, s, config);
        }
    }
    Ok(state)
}

pub fn detect(series: &TimeSeries, config: &DetectorConfig) -> Result<Segmentation> {
    let cache = CostCache::build(series, config.cost_model, config.shape)?;
    detect_with_cache(&cache, config)
}

/// Detection on a prebuilt cache, for running several penalties on one series.
pub fn detect_with_cache(cache: &CostCache, config: &DetectorConfig) -> Result<Segmentation> {
    let state = solve(cache, config)?;
    let n = cache.len();
    let change_points = state.backtrack(n);
    let segment_costs = segment_bounds(&change_points, n)
        .into_iter()
        .map(|(a, b)| cache.cost(a, b))
        .collect();
    let penalties = change_points.iter().map(|&t| config.penalty.g(t)).collect();
    Ok(Segmentation {
        change_points,
        total_objective: state.f[n],
        segment_costs,
        penalties,
        n,
    })
}

/// Checks that `cps` is a strictly increasing interior sequence whose
/// segments are all at least `min_len` long.
pub fn validate_change_points(cps: &[usize], n: usize, min_len: usize) -> Result<()> {
    let mut prev = 0;
    for &cp in cps {
        if cp == 0 || cp >= n {
            return Err(Error::Validation(format!(
                "change point {cp} is not interior to 1..{n}"
            )));
        }
        if cp <= prev {
            return Err(Error::Validation(
                "change points must be strictly increasing".into(),
            ));
        }
        if cp - prev < min_len {
            return Err(Error::Validation(format!(
                "segment ({prev}, {cp}] is shorter than {min_len}"
            )));
        }
        prev = cp;
    }
    if n - prev < min_len {
        return Err(Error::Validation(format!(
            "final segment ({prev}, {n}] is shorter than {min_len}"
        )));
    }
    Ok(())
}

/// Evaluates the objective of `cps` term by term, accumulating in the same
/// order as the recursion so equal segmentations give identical values.
pub fn objective_with_cache(
    cache: &CostCache,
    penalty: &PenaltyProfile,
    cps: &[usize],
    min_len: usize,
) -> Result<f64> {
    let n = cache.len();
    validate_change_points(cps, n, min_len.max(cache.model().min_segment_len()))?;
    if penalty.len() != n {
        return Err(Error::Config("penalty length does not match the series".into()));
    }
    let mut acc = 0.0;
    let mut prev = 0;
    for &end in cps.iter().chain(std::iter::once(&n)) {
        acc = acc + cache.cost(prev + 1, end) + penalty_at(penalty, prev);
        prev = end;
    }
    Ok(acc)
}

pub fn objective_value(series: &TimeSeries, cps: &[usize], config: &DetectorConfig) -> Result<f64> {
    let cache = CostCache::build(series, config.cost_model, config.shape)?;
    objective_with_cache(
        &cache,
        &config.penalty,
        cps,
        config.effective_min_segment_length(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::{build_profile, KernelSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_config(n: usize, beta: f64) -> DetectorConfig {
        DetectorConfig::new(
            CostModel::GaussianNll,
            build_profile(n, &[], 0.0, beta).unwrap(),
        )
    }

    /// Exhaustive minimizer: every interior subset, best objective, then
    /// fewest change points, then lexicographically smallest.
    fn brute_force(cache: &CostCache, penalty: &PenaltyProfile, min_len: usize) -> (Vec<usize>, f64) {
        let n = cache.len();
        let mut best: Option<(Vec<usize>, f64)> = None;
        for mask in 0u32..(1 << (n - 1)) {
            let cps: Vec<usize> = (1..n).filter(|i| mask & (1 << (i - 1)) != 0).collect();
            let Ok(v) = objective_with_cache(cache, penalty, &cps, min_len) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((bc, bv)) => {
                    v < *bv || (v == *bv && (cps.len(), &cps) < (bc.len(), bc))
                }
            };
            if better {
                best = Some((cps, v));
            }
        }
        best.unwrap()
    }

    #[test]
    fn constant_series_has_no_change_points() {
        let s = TimeSeries::new(vec![3.0; 40]).unwrap();
        for beta in [1e-3, 0.5, 10.0] {
            let seg = detect(&s, &gaussian_config(40, beta)).unwrap();
            assert!(seg.change_points.is_empty());
            let z = DetectorConfig::new(CostModel::ZagNll, build_profile(40, &[], 0.0, beta).unwrap())
                .with_shape(1.0);
            assert!(detect(&s, &z).unwrap().change_points.is_empty());
        }
    }

    #[test]
    fn twelve_point_mean_shift_matches_enumeration() {
        let y = [
            0.1, -0.3, 0.25, 0.0, -0.12, 0.2, 5.1, 4.8, 5.3, 4.9, 5.05, 5.2,
        ];
        let s = TimeSeries::new(y.to_vec()).unwrap();
        let cfg = gaussian_config(12, 2.0 * 12f64.ln());
        let seg = detect(&s, &cfg).unwrap();
        let cache = CostCache::build(&s, CostModel::GaussianNll, None).unwrap();
        let (cps, v) = brute_force(&cache, &cfg.penalty, 2);
        assert_eq!(seg.change_points, cps);
        assert_eq!(seg.change_points, vec![6]);
        assert!((seg.total_objective - v).abs() < 1e-9);
    }

    #[test]
    fn objective_expansions() {
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let s = TimeSeries::new(y).unwrap();
        let penalty = build_profile(10, &[KernelSpec::new(4, 2.0).unwrap()], 3.0, 1.5).unwrap();
        let cfg = DetectorConfig::new(CostModel::GaussianNll, penalty.clone());
        let cache = CostCache::build(&s, CostModel::GaussianNll, None).unwrap();
        assert_eq!(objective_value(&s, &[], &cfg).unwrap(), cache.cost(1, 10));
        let single = objective_value(&s, &[6], &cfg).unwrap();
        let want = cache.cost(1, 6) + penalty.g(6) + cache.cost(7, 10);
        assert!((single - want).abs() < 1e-12);
        assert!(matches!(objective_value(&s, &[6, 5], &cfg), Err(Error::Validation(_))));
        assert!(matches!(objective_value(&s, &[10], &cfg), Err(Error::Validation(_))));
        assert!(matches!(objective_value(&s, &[1], &cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn length_and_config_errors() {
        let s = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(detect(&s, &gaussian_config(3, 1.0)), Err(Error::Length(_))));
        let s = TimeSeries::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(matches!(detect(&s, &gaussian_config(4, 1.0)), Err(Error::Config(_))));
        let cfg = gaussian_config(5, 1.0).with_min_segment_length(0);
        assert!(matches!(detect(&s, &cfg), Err(Error::Config(_))));
        let cfg = gaussian_config(5, 1.0).with_min_segment_length(3);
        assert!(matches!(detect(&s, &cfg), Err(Error::Length(_))));
    }

    #[test]
    fn zero_lambda_reduces_pruning_to_constant_penalty_rule() {
        // With g = β everywhere, the test compares F(t) + C + β(t>0) against F(s) + β.
        let y: Vec<f64> = (0..60).map(|i| if i < 30 { 0.0 } else { 4.0 } + (i as f64).sin()).collect();
        let s = TimeSeries::new(y).unwrap();
        let cache = CostCache::build(&s, CostModel::GaussianNll, None).unwrap();
        let cfg = gaussian_config(60, 5.0);
        let state = solve(&cache, &cfg).unwrap();
        let kernels = KernelSpec::shared(&[10, 45], 5.0).unwrap();
        let same = cfg.clone().with_penalty(build_profile(60, &kernels, 0.0, 5.0).unwrap());
        let other = solve(&cache, &same).unwrap();
        assert_eq!(state.candidate_indices(), other.candidate_indices());
        assert_eq!(state.f, other.f);
    }

    #[test]
    fn weaker_prior_support_is_pruned_first() {
        // Equal F and zero segment cost: the comparison reduces to λ(S(t) - S(s)).
        let profile = build_profile(20, &[KernelSpec::new(10, 2.0).unwrap()], 4.0, 1.0).unwrap();
        let cfg = DetectorConfig::new(CostModel::ZagNll, profile.clone());
        let mut state = DpState::new(20, 1);
        let s = 8;
        state.f[s] = 10.0;
        for t in [2usize, 9] {
            state.f[t] = 10.0;
            state.candidates.push(Candidate {
                index: t,
                expires_at: None,
                value: state.f[t] + profile.g(t),
            });
        }
        assert!(profile.support(2) > profile.support(s));
        assert!(profile.support(9) < profile.support(s));
        prune_step(&mut state, s, &cfg);
        assert_eq!(state.candidates[0].expires_at, Some(s + 1));
        assert_eq!(state.candidates[1].expires_at, None);
    }

    #[test]
    fn equality_is_not_pruned() {
        let profile = build_profile(10, &[], 0.0, 1.0).unwrap();
        let cfg = DetectorConfig::new(CostModel::ZagNll, profile);
        let mut state = DpState::new(10, 1);
        state.f[4] = 7.0;
        state.candidates.push(Candidate {
            index: 2,
            expires_at: None,
            value: 8.0,
        });
        prune_step(&mut state, 4, &cfg);
        assert_eq!(state.candidates[0].expires_at, None);
    }

    #[test]
    fn pruning_reduces_work_on_long_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 3000;
        let y: Vec<f64> = (0..n)
            .map(|i| ((i / 300) % 2) as f64 * 3.0 + rng.random_range(-1.0..1.0))
            .collect();
        let s = TimeSeries::new(y).unwrap();
        let cache = CostCache::build(&s, CostModel::GaussianNll, None).unwrap();
        let cfg = gaussian_config(n, 4.0 * (n as f64).ln());
        let pruned = solve(&cache, &cfg).unwrap();
        let full = solve(&cache, &cfg.clone().with_pruning(false)).unwrap();
        assert!(pruned.cost_evaluations * 5 < full.cost_evaluations);
        assert_eq!(pruned.backtrack(n), full.backtrack(n));
        assert_eq!(pruned.backtrack(n).len(), 9);
    }

    #[test]
    fn min_segment_length_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = TimeSeries::new(y).unwrap();
        for l in [2, 5, 17] {
            let cfg = gaussian_config(200, 0.5).with_min_segment_length(l);
            let seg = detect(&s, &cfg).unwrap();
            assert!(!seg.change_points.is_empty());
            for (a, b) in seg.segments() {
                assert!(b - a + 1 >= l);
            }
            let unpruned = detect(&s, &cfg.clone().with_pruning(false)).unwrap();
            assert_eq!(seg, unpruned);
        }
    }

    #[test]
    fn positive_k_is_flagged_uncertified() {
        let cfg = gaussian_config(10, 1.0);
        assert!(cfg.is_pruning_certified());
        assert!(cfg.clone().with_pruning_constant(-2.0).is_pruning_certified());
        assert!(!cfg.with_pruning_constant(0.5).is_pruning_certified());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, bool, Vec<usize>, f64, f64)> {
        (6usize..12, any::<bool>()).prop_flat_map(|(n, zag)| {
            let values = if zag {
                prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..20.0], n).boxed()
            } else {
                prop::collection::vec(-5.0f64..5.0, n).boxed()
            };
            (
                values,
                Just(zag),
                prop::collection::vec(1..=n, 0..3),
                0.1f64..6.0,
                prop_oneof![Just(0.0), 0.1f64..10.0],
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn detect_is_exact(inst in instance(), sigma in 0.5f64..4.0, min_len in 1usize..3) {
            let (y, zag, centers, beta, lambda) = inst;
            let n = y.len();
            let model = if zag { CostModel::ZagNll } else { CostModel::GaussianNll };
            let penalty = build_profile(n, &KernelSpec::shared(&centers, sigma).unwrap(), lambda, beta).unwrap();
            let mut cfg = DetectorConfig::new(model, penalty.clone()).with_min_segment_length(min_len);
            if zag { cfg = cfg.with_shape(0.9); }
            let s = TimeSeries::new(y).unwrap();
            let cache = CostCache::build(&s, model, cfg.shape).unwrap();
            let seg = detect_with_cache(&cache, &cfg).unwrap();
            let (cps, v) = brute_force(&cache, &penalty, cfg.effective_min_segment_length());
            prop_assert_eq!(&seg.change_points, &cps);
            prop_assert!((seg.total_objective - v).abs() <= 1e-9 * (1.0 + v.abs()));
            let sum: f64 = seg.segment_costs.iter().sum::<f64>() + seg.penalties.iter().sum::<f64>();
            prop_assert!((sum - seg.total_objective).abs() <= 1e-9 * (1.0 + seg.total_objective.abs()));
        }

        #[test]
        fn constant_shift_of_costs_keeps_change_points(y in prop::collection::vec(-5.0f64..5.0, 20..40), beta in 0.5f64..5.0, shift in -100.0f64..100.0) {
            // An additive constant per observation shifts every segmentation by
            // the same amount; scaling the data is one way to get it for the
            // Gaussian cost, since ln(c² σ²) = ln σ² + 2 ln c.
            let n = y.len();
            let cfg = gaussian_config(n, beta);
            let a = detect(&TimeSeries::new(y.clone()).unwrap(), &cfg).unwrap();
            let scale = shift.abs() + 1.0;
            let scaled: Vec<f64> = y.iter().map(|v| v * scale).collect();
            let b = detect(&TimeSeries::new(scaled).unwrap(), &cfg).unwrap();
            prop_assert_eq!(a.change_points, b.change_points);
        }

        #[test]
        fn raising_every_penalty_never_adds_change_points(y in prop::collection::vec(-5.0f64..5.0, 20..60), beta in 0.5f64..5.0, delta in 0.0f64..10.0, c in 1usize..20) {
            let n = y.len();
            let penalty = build_profile(n, &[KernelSpec::new(c, 3.0).unwrap()], beta, beta).unwrap();
            let cfg = DetectorConfig::new(CostModel::GaussianNll, penalty.clone());
            let s = TimeSeries::new(y).unwrap();
            let a = detect(&s, &cfg).unwrap();
            let b = detect(&s, &cfg.clone().with_penalty(penalty.shifted(delta).unwrap())).unwrap();
            prop_assert!(b.num_change_points() <= a.num_change_points());
        }
    }
}
