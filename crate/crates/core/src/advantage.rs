//! Population-level optimal membership advantage.
//!
//! The accuracy-metric advantage is `∫ |p·P − (1−p)·Q|`. It is estimated by a
//! histogram sum `W_N` for discrete outputs, or by a Monte Carlo integral
//! `U_N` of the KDE contrast for continuous outputs. Both come with the
//! McDiarmid stability radius `√((2/N)·ln(2/δ))`. This radius bounds the
//! deviation from the estimator's own mean; it is not a confidence interval
//! for the true advantage.
//!
//! For generalized metrics there is no closed-form plug-in. The data is split
//! three ways: the posterior is fitted on the first part, a threshold is
//! tuned on the second, and the metric is scored on the third.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{
    distinct_count, fit_discrete, BinningScheme, Cell, DensityModel, DensityPair, DensitySpec, KdeConfig,
    MAX_DENSITY_DIM,
};
use crate::error::{Error, Result};
use crate::experiment::{check_delta, check_prior, split_three_ways, stream_rng, LabeledQuerySet, QueryOutput};
use crate::individual::f_p_hat;
use crate::metrics::{ConfusionRates, GeneralizedMetric};

/// Default number of thresholds tried by the empirical search.
pub const DEFAULT_GRID: usize = 512;
/// Smallest accepted Monte Carlo sample for `U_N`.
pub const MIN_MC_SAMPLES: usize = 1000;
const MAX_DEFAULT_MC: usize = 1_000_000;
const MC_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "W_N")]
    Discrete,
    #[serde(rename = "U_N")]
    Continuous,
    #[serde(rename = "generalized-empirical")]
    GeneralizedEmpirical,
    #[serde(rename = "from-individual")]
    FromIndividual,
}

/// Direction of a threshold rule on the estimated posterior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Predict "member" when `η̂ > t`.
    Forward,
    /// Predict "member" when `η̂ < t`.
    Reverse,
}

impl Orientation {
    fn predicts_member(self, eta: f64, t: f64) -> bool {
        match self {
            Orientation::Forward => eta > t,
            Orientation::Reverse => eta < t,
        }
    }
}

/// Threshold chosen by the empirical search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub orientation: Orientation,
    /// Metric value on the tuning partition.
    pub tuning_value: f64,
    /// Grid points where the metric was undefined on the tuning partition.
    pub skipped_grid_points: usize,
}

/// Settings an estimate was produced with, echoed for reproducibility.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partitions: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub point: f64,
    pub estimator_kind: EstimatorKind,
    /// McDiarmid stability radius at level δ; absent for the empirical
    /// generalized estimate.
    pub concentration_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub n_used: usize,
    /// Monte Carlo standard error of `U_N`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_standard_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdChoice>,
    pub config: EstimateConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// `√((2/N)·ln(2/δ))`.
pub fn mcdiarmid_radius(n: usize, delta: f64) -> f64 {
    (2.0 / n as f64 * (2.0 / delta).ln()).sqrt()
}

/// Estimated membership posterior `η̂(x) = p·P̂ / (p·P̂ + (1−p)·Q̂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorEstimator {
    pub densities: DensityPair,
    pub prior: f64,
}

impl PosteriorEstimator {
    pub fn fit(set: &LabeledQuerySet, spec: &DensitySpec) -> Result<Self> {
        Ok(Self {
            densities: DensityPair::fit(set, spec)?,
            prior: set.prior(),
        })
    }

    pub fn eta(&self, x: &QueryOutput) -> Result<f64> {
        let f = f_p_hat(x, &self.densities.members, &self.densities.nonmembers, self.prior)?;
        Ok((1.0 + f) / 2.0)
    }
}

/// `W_N = Σ_j |p·k₁ⱼ/N₁ − (1−p)·k₂ⱼ/N₂|` over the cells of `scheme`, or over
/// distinct values when no scheme is given.
///
/// Without a scheme the outputs must look discrete: more distinct values than
/// half the sample size is rejected.
pub fn advantage_discrete(
    set: &LabeledQuerySet,
    scheme: Option<&BinningScheme>,
    delta: f64,
) -> Result<AdvantageEstimate> {
    check_delta(delta)?;
    if set.dim() > MAX_DENSITY_DIM {
        return Err(Error::DimensionTooHigh(set.dim()));
    }
    if scheme.is_none() {
        let distinct = distinct_count(set.outputs());
        if distinct > set.len() / 2 {
            return Err(Error::ContinuousWithoutScheme {
                distinct,
                total: set.len(),
            });
        }
    }
    let members: Vec<QueryOutput> = set.members().cloned().collect();
    let nonmembers: Vec<QueryOutput> = set.nonmembers().cloned().collect();
    let pd = fit_discrete(&members, scheme)?;
    let qd = fit_discrete(&nonmembers, scheme)?;
    let p = set.prior();
    let (n1, n2) = (pd.n() as f64, qd.n() as f64);
    let mut joint: BTreeMap<&Cell, (u64, u64)> = BTreeMap::new();
    for (c, k) in pd.cells() {
        joint.entry(c).or_default().0 = k;
    }
    for (c, k) in qd.cells() {
        joint.entry(c).or_default().1 = k;
    }
    let point: f64 = joint
        .values()
        .map(|&(k1, k2)| (p * k1 as f64 / n1 - (1.0 - p) * k2 as f64 / n2).abs())
        .sum();
    Ok(AdvantageEstimate {
        point: point.min(1.0),
        estimator_kind: EstimatorKind::Discrete,
        concentration_radius: Some(mcdiarmid_radius(set.len(), delta)),
        delta: Some(delta),
        n_used: set.len(),
        mc_standard_error: None,
        threshold: None,
        config: EstimateConfig {
            bins: scheme.map(|s| s.bins().to_vec()),
            ..Default::default()
        },
        warnings: Vec::new(),
    })
}

/// Default Monte Carlo sample size: `20·N`, capped at one million.
pub fn default_mc_samples(n: usize) -> usize {
    (20 * n).clamp(MIN_MC_SAMPLES, MAX_DEFAULT_MC)
}

/// `U_N = ∫ |p·P̂ − (1−p)·Q̂|` for KDEs `P̂`, `Q̂` sharing one bandwidth.
///
/// The integral equals `E|f̂_p(X)|` with `X` drawn from the KDE mixture
/// `p·P̂ + (1−p)·Q̂`, which is sampled exactly: pick a member support point
/// with probability `p` (else a non-member one) and add kernel noise. Draws
/// run in fixed chunks with their own RNG streams and are reduced in chunk
/// order, so the result does not depend on the thread count.
pub fn advantage_continuous(
    set: &LabeledQuerySet,
    kde: &KdeConfig,
    delta: f64,
    mc_samples: Option<usize>,
    seed: u64,
) -> Result<AdvantageEstimate> {
    check_delta(delta)?;
    let m = mc_samples.unwrap_or_else(|| default_mc_samples(set.len()));
    if m < MIN_MC_SAMPLES {
        return Err(Error::invalid(
            "mc_samples",
            format!("{m} is below the minimum of {MIN_MC_SAMPLES}"),
        ));
    }
    let pair = DensityPair::fit(set, &DensitySpec::Continuous(*kde)).map_err(|e| match e {
        Error::Degenerate(msg) => Error::Degenerate(format!("{msg}; use the discrete estimator instead")),
        e => e,
    })?;
    let (DensityModel::Kde(pk), DensityModel::Kde(qk)) = (&pair.members, &pair.nonmembers) else {
        unreachable!("continuous spec yields KDEs")
    };
    let p = set.prior();
    let chunks = m.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = MC_CHUNK.min(m - c * MC_CHUNK);
            let mut x = vec![0.0; pk.dim()];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                if rng.random::<f64>() < p {
                    pk.perturb(rng.random_range(0..pk.n()), &mut rng, &mut x);
                } else {
                    qk.perturb(rng.random_range(0..qk.n()), &mut rng, &mut x);
                }
                let a = p * pk.density(&x);
                let b = (1.0 - p) * qk.density(&x);
                // Past the kernel cutoff both sums vanish; |f| there is 0 by
                // convention and the event has negligible probability.
                let v = if a + b > 0.0 { ((a - b) / (a + b)).abs() } else { 0.0 };
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (sum, sum2) = partial.iter().fold((0.0, 0.0), |(a, b), &(s, s2)| (a + s, b + s2));
    let mean = sum / m as f64;
    let var = (sum2 / m as f64 - mean * mean).max(0.0);
    Ok(AdvantageEstimate {
        point: mean,
        estimator_kind: EstimatorKind::Continuous,
        concentration_radius: Some(mcdiarmid_radius(set.len(), delta)),
        delta: Some(delta),
        n_used: set.len(),
        mc_standard_error: Some((var / m as f64).sqrt()),
        threshold: None,
        config: EstimateConfig {
            bandwidth: Some(pk.bandwidth().to_vec()),
            kernel: Some(pk.kernel().to_string()),
            mc_samples: Some(m),
            seed: Some(seed),
            ..Default::default()
        },
        warnings: Vec::new(),
    })
}

fn confusion(points: &[(f64, bool)], orientation: Orientation, t: f64) -> Result<ConfusionRates> {
    let (mut tp, mut fp, mut fneg, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for &(eta, member) in points {
        match (orientation.predicts_member(eta, t), member) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => tn += 1,
        }
    }
    ConfusionRates::from_counts(tp, fp, fneg, tn)
}

fn logit(t: f64) -> f64 {
    (t / (1.0 - t)).ln()
}

/// Among the grid points attaining the maximum, take the longest contiguous
/// run (measured in log-odds) and return the grid index nearest its log-odds
/// midpoint. Earlier runs win ties.
fn pick_from_plateau(grid: &[f64], values: &[Option<f64>], best: f64) -> usize {
    let hit = |i: usize| values[i].is_some_and(|v| v >= best - 1e-12);
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < grid.len() {
        if hit(i) {
            let start = i;
            while i + 1 < grid.len() && (hit(i + 1) || values[i + 1].is_none()) {
                i += 1;
            }
            let mut end = i;
            while !hit(end) {
                end -= 1;
            }
            runs.push((start, end));
        }
        i += 1;
    }
    let span = |&(s, e): &(usize, usize)| logit(grid[e]) - logit(grid[s]);
    let (s, e) = runs
        .iter()
        .copied()
        .fold(None, |acc: Option<(usize, usize)>, r| match acc {
            Some(a) if span(&a) >= span(&r) => Some(a),
            _ => Some(r),
        })
        .expect("best value is attained");
    let mid = 0.5 * (logit(grid[s]) + logit(grid[e]));
    (s..=e)
        .filter(|&k| hit(k))
        .min_by(|&a, &b| (logit(grid[a]) - mid).abs().total_cmp(&(logit(grid[b]) - mid).abs()))
        .unwrap_or(s)
}

/// Empirical generalized-metric advantage.
///
/// Partition 1 fits the posterior `η̂`. On partition 2 every threshold
/// `k/(grid+1)`, `k = 1..grid`, is tried in both orientations; thresholds
/// where the metric is undefined are skipped. The metric of the chosen rule
/// on the aggregate confusion counts of partition 3 is the estimate. Where
/// `η̂` is undefined (no mass under either fitted density) the prior is used.
pub fn advantage_generalized(
    set: &LabeledQuerySet,
    metric: &GeneralizedMetric,
    density: &DensitySpec,
    delta: f64,
    grid: usize,
    seed: u64,
) -> Result<AdvantageEstimate> {
    check_delta(delta)?;
    if grid == 0 {
        return Err(Error::invalid("grid", "need at least one threshold"));
    }
    let [fit_part, tune_part, score_part] = split_three_ways(set, seed)?;
    let posterior = PosteriorEstimator::fit(&fit_part, density)?;
    let score = |part: &LabeledQuerySet| -> Result<Vec<(f64, bool)>> {
        part.samples()
            .par_iter()
            .map(|(x, m)| match posterior.eta(x) {
                Ok(e) => Ok((e, m.is_member())),
                Err(Error::ZeroMixtureMass) => Ok((posterior.prior, m.is_member())),
                Err(e) => Err(e),
            })
            .collect()
    };
    let tune = score(&tune_part)?;
    let held_out = score(&score_part)?;

    let thresholds: Vec<f64> = (1..=grid).map(|k| k as f64 / (grid + 1) as f64).collect();
    let sweep = |o: Orientation| -> Vec<Option<f64>> {
        thresholds
            .par_iter()
            .map(|&t| confusion(&tune, o, t).and_then(|r| metric.evaluate(&r)).ok())
            .collect()
    };
    let forward = sweep(Orientation::Forward);
    let reverse = sweep(Orientation::Reverse);
    let max_of = |v: &[Option<f64>]| v.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let (fmax, rmax) = (max_of(&forward), max_of(&reverse));
    if fmax == f64::NEG_INFINITY && rmax == f64::NEG_INFINITY {
        return Err(Error::MetricUndefinedEverywhere("tuning partition"));
    }
    let (orientation, values, best) = if fmax >= rmax - 1e-12 {
        (Orientation::Forward, &forward, fmax)
    } else {
        (Orientation::Reverse, &reverse, rmax)
    };
    let skipped = values.iter().filter(|v| v.is_none()).count();
    let k = pick_from_plateau(&thresholds, values, best);
    let t = thresholds[k];
    let point = confusion(&held_out, orientation, t)
        .and_then(|r| metric.evaluate(&r))
        .map_err(|e| match e {
            Error::ZeroDenominator { .. } => Error::MetricUndefinedEverywhere("held-out partition"),
            e => e,
        })?;

    let mut warnings = Vec::new();
    if skipped > 0 {
        warnings.push(format!(
            "{skipped} of {grid} thresholds skipped: metric undefined on the tuning partition"
        ));
    }
    let (bins, bandwidth, kernel) = match &posterior.densities.members {
        DensityModel::Discrete(d) => (d.scheme().map(|s| s.bins().to_vec()), None, None),
        DensityModel::Kde(k) => (None, Some(k.bandwidth().to_vec()), Some(k.kernel().to_string())),
    };
    Ok(AdvantageEstimate {
        point,
        estimator_kind: EstimatorKind::GeneralizedEmpirical,
        concentration_radius: None,
        delta: Some(delta),
        n_used: set.len(),
        mc_standard_error: None,
        threshold: Some(ThresholdChoice {
            threshold: t,
            orientation,
            tuning_value: best,
            skipped_grid_points: skipped,
        }),
        config: EstimateConfig {
            bins,
            bandwidth,
            kernel,
            partitions: Some([fit_part.len(), tune_part.len(), score_part.len()]),
            grid: Some(grid),
            seed: Some(seed),
            metric: Some(metric.label().to_string()),
            ..Default::default()
        },
        warnings,
    })
}

/// Advantage as the mixture mean of per-sample risk, `E_z |f̂_p(z)|`, over the
/// points of `set`.
///
/// Members are weighted `p/N₁` and non-members `(1−p)/N₂`, so the weights
/// match the mixture exactly even when `N·p` is not an integer. With the
/// histograms of `set` as densities this equals `W_N`.
pub fn advantage_from_individual(
    set: &LabeledQuerySet,
    pdens: &DensityModel,
    qdens: &DensityModel,
    prior: f64,
) -> Result<AdvantageEstimate> {
    check_prior(prior)?;
    let risks: Vec<f64> = set
        .samples()
        .par_iter()
        .map(|(x, _)| f_p_hat(x, pdens, qdens, prior).map(f64::abs))
        .collect::<Result<_>>()?;
    let w1 = prior / set.n_members() as f64;
    let w2 = (1.0 - prior) / set.n_nonmembers() as f64;
    let point = set
        .samples()
        .iter()
        .zip(&risks)
        .map(|((_, m), r)| if m.is_member() { w1 * r } else { w2 * r })
        .sum();
    Ok(AdvantageEstimate {
        point,
        estimator_kind: EstimatorKind::FromIndividual,
        concentration_radius: None,
        delta: None,
        n_used: set.len(),
        mc_standard_error: None,
        threshold: None,
        config: EstimateConfig::default(),
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{fit_discrete, Bandwidth, Kernel};
    use crate::metrics::named_metric;
    use crate::oracle::{exact_advantage, sample_toy, FiniteToyDistribution, ToySpec};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(v: f64) -> QueryOutput {
        QueryOutput::scalar(v).unwrap()
    }

    fn set_of(members: &[f64], nonmembers: &[f64], p: f64) -> LabeledQuerySet {
        LabeledQuerySet::from_parts(
            members.iter().map(|&v| q(v)).collect(),
            nonmembers.iter().map(|&v| q(v)).collect(),
            p,
        )
        .unwrap()
    }

    #[test]
    fn radius_formula() {
        // √((2/20000)·ln 40)
        assert!((mcdiarmid_radius(20_000, 0.05) - 0.019_206).abs() < 1e-5);
    }

    #[test]
    fn disjoint_support_is_perfect() {
        let set = set_of(&[0.0, 0.0, 1.0, 1.0], &[2.0, 3.0, 3.0, 2.0], 0.3);
        assert!((advantage_discrete(&set, None, 0.05).unwrap().point - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_baseline() {
        let vals = [0.0, 1.0, 1.0, 2.0, 0.0, 1.0];
        for p in [0.2, 0.5, 0.8] {
            let set = set_of(&vals, &vals, p);
            let w = advantage_discrete(&set, None, 0.05).unwrap().point;
            assert!((w - (2.0 * p - 1.0).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn continuous_without_scheme_rejected() {
        let set = set_of(&[0.1, 0.2, 0.3], &[0.4, 0.5, 0.6], 0.5);
        assert!(matches!(
            advantage_discrete(&set, None, 0.05),
            Err(Error::ContinuousWithoutScheme { distinct: 6, total: 6 })
        ));
        let scheme = BinningScheme::fit(set.outputs(), 4).unwrap();
        assert!(advantage_discrete(&set, Some(&scheme), 0.05).is_ok());
    }

    #[test]
    fn two_cell_large_sample() {
        let toy = FiniteToyDistribution::new(vec![0.9, 0.1], vec![0.1, 0.9], 0.5).unwrap();
        let set = toy.sample_set(100_000, 1).unwrap();
        let w = advantage_discrete(&set, None, 0.05).unwrap();
        assert!((w.point - exact_advantage(&toy)).abs() < 0.01, "{}", w.point);
        assert_eq!(w.estimator_kind, EstimatorKind::Discrete);
    }

    #[test]
    fn plug_in_identity_with_non_integral_prior() {
        let toy = FiniteToyDistribution::new(vec![0.5, 0.3, 0.2], vec![0.2, 0.2, 0.6], 0.37).unwrap();
        let set = toy.sample_set(1001, 4).unwrap();
        let members: Vec<_> = set.members().cloned().collect();
        let nonmembers: Vec<_> = set.nonmembers().cloned().collect();
        let pd = DensityModel::Discrete(fit_discrete(&members, None).unwrap());
        let qd = DensityModel::Discrete(fit_discrete(&nonmembers, None).unwrap());
        let a = advantage_from_individual(&set, &pd, &qd, 0.37).unwrap().point;
        let w = advantage_discrete(&set, None, 0.05).unwrap().point;
        assert!((a - w).abs() < 1e-9, "{a} vs {w}");
    }

    #[test]
    fn shuffling_does_not_change_w() {
        let toy = FiniteToyDistribution::new(vec![0.6, 0.4], vec![0.3, 0.7], 0.5).unwrap();
        let set = toy.sample_set(500, 2).unwrap();
        let mut samples = set.samples().to_vec();
        samples.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let shuffled = LabeledQuerySet::from_samples(samples, 0.5).unwrap();
        assert_eq!(
            advantage_discrete(&set, None, 0.05).unwrap().point,
            advantage_discrete(&shuffled, None, 0.05).unwrap().point
        );
    }

    #[test]
    fn continuous_is_seeded() {
        let members = sample_toy(&ToySpec::normal(0.0, 1.0), 400, 1).unwrap();
        let nonmembers = sample_toy(&ToySpec::normal(1.0, 1.0), 400, 2).unwrap();
        let set = LabeledQuerySet::from_parts(members, nonmembers, 0.5).unwrap();
        let cfg = KdeConfig::default();
        let a = advantage_continuous(&set, &cfg, 0.05, Some(5000), 7).unwrap();
        let b = advantage_continuous(&set, &cfg, 0.05, Some(5000), 7).unwrap();
        assert_eq!(a, b);
        assert!(a.point > 0.0 && a.point <= 1.0);
        assert!(a.mc_standard_error.unwrap() < 0.01);
        assert!(advantage_continuous(&set, &cfg, 0.05, Some(10), 7).is_err());
    }

    #[test]
    fn continuous_degenerate_data() {
        let set = set_of(&[1.0, 1.0, 1.0], &[1.0, 1.0], 0.5);
        let err = advantage_continuous(&set, &KdeConfig::default(), 0.05, None, 0).unwrap_err();
        assert!(matches!(err, Error::Degenerate(ref m) if m.contains("discrete")), "{err}");
    }

    #[test]
    fn continuous_matches_from_individual() {
        let members = sample_toy(&ToySpec::normal(0.0, 1.0), 2000, 5).unwrap();
        let nonmembers = sample_toy(&ToySpec::normal(1.5, 1.0), 2000, 6).unwrap();
        let set = LabeledQuerySet::from_parts(members, nonmembers, 0.5).unwrap();
        let cfg = KdeConfig {
            bandwidth: Bandwidth::Auto,
            kernel: Kernel::Gaussian,
        };
        let u = advantage_continuous(&set, &cfg, 0.05, Some(20_000), 1).unwrap().point;
        let pair = DensityPair::fit(&set, &DensitySpec::Continuous(cfg)).unwrap();
        let a = advantage_from_individual(&set, &pair.members, &pair.nonmembers, 0.5).unwrap().point;
        assert!((u - a).abs() < 0.05, "{u} vs {a}");
    }

    #[test]
    fn generalized_accuracy_tracks_w() {
        let toy = FiniteToyDistribution::new(vec![0.9, 0.1], vec![0.1, 0.9], 0.5).unwrap();
        let set = toy.sample_set(30_000, 9).unwrap();
        let acc = GeneralizedMetric::accuracy();
        let spec = DensitySpec::Discrete { bins: None };
        let g = advantage_generalized(&set, &acc, &spec, 0.05, DEFAULT_GRID, 1).unwrap();
        let w = advantage_discrete(&set, None, 0.05).unwrap().point;
        assert!((2.0 * g.point - 1.0 - w).abs() < 0.03, "{} vs {w}", g.point);
        assert_eq!(g.config.partitions.unwrap().iter().sum::<usize>(), 30_000);
    }

    #[test]
    fn generalized_am_finds_prior() {
        let toy = FiniteToyDistribution::new(vec![0.9, 0.1], vec![0.1, 0.9], 0.1).unwrap();
        let set = toy.sample_set(30_000, 10).unwrap();
        let am = named_metric("AM", 0.1).unwrap();
        let g = advantage_generalized(&set, &am, &DensitySpec::Discrete { bins: None }, 0.05, DEFAULT_GRID, 2).unwrap();
        let t = g.threshold.as_ref().unwrap();
        assert_eq!(t.orientation, Orientation::Forward);
        assert!((t.threshold - 0.1).abs() < 0.05, "{}", t.threshold);
        assert!((g.point - 0.9).abs() < 0.03);
    }

    #[test]
    fn generalized_indistinguishable() {
        let toy = FiniteToyDistribution::new(vec![0.3, 0.7], vec![0.3, 0.7], 0.5).unwrap();
        let set = toy.sample_set(30_000, 11).unwrap();
        let acc = GeneralizedMetric::accuracy();
        let g = advantage_generalized(&set, &acc, &DensitySpec::Discrete { bins: None }, 0.05, 64, 3).unwrap();
        assert!((g.point - 0.5).abs() < 0.03, "{}", g.point);
    }

    #[test]
    fn generalized_ppv_skips_empty_predictions() {
        let toy = FiniteToyDistribution::new(vec![0.8, 0.2], vec![0.3, 0.7], 0.5).unwrap();
        let set = toy.sample_set(3000, 12).unwrap();
        let ppv = named_metric("PPV", 0.5).unwrap();
        let g = advantage_generalized(&set, &ppv, &DensitySpec::Discrete { bins: None }, 0.05, 64, 4).unwrap();
        assert!(g.threshold.unwrap().skipped_grid_points > 0);
        assert!(!g.warnings.is_empty());
        assert!(g.point > 0.5);
    }

    #[test]
    fn plateau_midpoint_in_log_odds() {
        let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let v = |xs: &[f64]| xs.iter().map(|&x| Some(x)).collect::<Vec<_>>();
        // Plateau over 0.2..=0.8 is symmetric in log-odds around 0.5.
        let vals = v(&[0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(pick_from_plateau(&grid, &vals, 1.0), 4);
        // The longer of two runs wins.
        let vals = v(&[1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(pick_from_plateau(&grid, &vals, 1.0), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn merging_bins_never_increases_w(seed in 0u64..1000, p in 0.1f64..0.9) {
            let members = sample_toy(&ToySpec::normal(0.0, 1.0), 200, seed).unwrap();
            let nonmembers = sample_toy(&ToySpec::normal(0.7, 1.3), 200, seed + 1).unwrap();
            let set = LabeledQuerySet::from_parts(members, nonmembers, p).unwrap();
            let mut scheme = BinningScheme::fit(set.outputs(), 64).unwrap();
            let mut prev = advantage_discrete(&set, Some(&scheme), 0.05).unwrap().point;
            while let Some(coarse) = scheme.coarsen() {
                let w = advantage_discrete(&set, Some(&coarse), 0.05).unwrap().point;
                prop_assert!(w <= prev + 1e-12);
                prop_assert!(w >= (2.0 * p - 1.0).abs() - 1e-12);
                prev = w;
                scheme = coarse;
            }
        }

        #[test]
        fn w_in_unit_interval(k in 2usize..6, p in 0.01f64..0.99, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let toy = FiniteToyDistribution::random(&mut rng, k, p).unwrap();
            if let Ok(set) = toy.sample_set(400, seed) {
                let w = advantage_discrete(&set, None, 0.05).unwrap().point;
                prop_assert!((0.0..=1.0).contains(&w));
            }
        }
    }
}
