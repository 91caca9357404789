//! Ground truth for tests and acceptance runs.
//!
//! Everything here is derived directly from the definitions (finite sums over
//! outcomes, closed-form normal integrals, plain enumeration) and shares no
//! code with the estimators it is used to check. Only the domain types are
//! common.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::experiment::{class_sizes, LabeledQuerySet, QueryOutput};
use crate::metrics::GeneralizedMetric;

const PMF_TOL: f64 = 1e-12;

/// Two pmfs over outcomes `0..k` and a prior. Outcome `j` is presented to the
/// estimators as the scalar query output `j as f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteToyDistribution {
    member: Vec<f64>,
    nonmember: Vec<f64>,
    prior: f64,
}

fn check_pmf(pmf: &[f64], what: &'static str) -> Result<()> {
    if pmf.is_empty() {
        return Err(Error::Empty(what));
    }
    if pmf.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
        return Err(Error::invalid("pmf", format!("{what} has a negative or non-finite weight")));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > PMF_TOL {
        return Err(Error::invalid("pmf", format!("{what} sums to {total}")));
    }
    Ok(())
}

impl FiniteToyDistribution {
    pub fn new(member: Vec<f64>, nonmember: Vec<f64>, prior: f64) -> Result<Self> {
        check_pmf(&member, "member pmf")?;
        check_pmf(&nonmember, "non-member pmf")?;
        if member.len() != nonmember.len() {
            return Err(Error::DimensionMismatch {
                expected: member.len(),
                found: nonmember.len(),
            });
        }
        if !(prior > 0.0 && prior < 1.0) {
            return Err(Error::invalid("prior_p", format!("{prior} is not in (0, 1)")));
        }
        Ok(Self { member, nonmember, prior })
    }

    /// Random toy with `outcomes` cells and strictly positive weights.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, outcomes: usize, prior: f64) -> Result<Self> {
        let mut pmf = || {
            let w: Vec<f64> = (0..outcomes).map(|_| rng.random::<f64>() + 0.01).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let member = pmf();
        let nonmember = pmf();
        Self::new(member, nonmember, prior)
    }

    pub fn outcomes(&self) -> usize {
        self.member.len()
    }

    pub fn member_pmf(&self) -> &[f64] {
        &self.member
    }

    pub fn nonmember_pmf(&self) -> &[f64] {
        &self.nonmember
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    /// Posterior probability of membership given outcome `j`.
    pub fn posterior(&self, j: usize) -> Result<f64> {
        let a = self.prior * self.member[j];
        let b = (1.0 - self.prior) * self.nonmember[j];
        if a + b <= 0.0 {
            return Err(Error::ZeroMixtureMass);
        }
        Ok(a / (a + b))
    }

    /// Draws one run of the sampling experiment: `round(N·p)` member outcomes
    /// and the rest non-member outcomes.
    pub fn sample_set(&self, n: usize, seed: u64) -> Result<LabeledQuerySet> {
        let (n1, n2) = class_sizes(n, self.prior);
        let members = sample_toy(&ToySpec::Categorical(self.member.clone()), n1, seed)?;
        let nonmembers = sample_toy(
            &ToySpec::Categorical(self.nonmember.clone()),
            n2,
            seed ^ 0x9e37_79b9_7f4a_7c15,
        )?;
        LabeledQuerySet::from_parts(members, nonmembers, self.prior)
    }
}

/// Σ_j |p·p_j − (1−p)·q_j|.
pub fn exact_advantage(toy: &FiniteToyDistribution) -> f64 {
    let p = toy.prior;
    toy.member
        .iter()
        .zip(&toy.nonmember)
        .map(|(a, b)| (p * a - (1.0 - p) * b).abs())
        .sum()
}

/// |f_p| at outcome `j`.
pub fn exact_individual_risk(toy: &FiniteToyDistribution, j: usize) -> Result<f64> {
    let p = toy.prior;
    let a = p * toy.member[j];
    let b = (1.0 - p) * toy.nonmember[j];
    if a + b <= 0.0 {
        return Err(Error::ZeroMixtureMass);
    }
    Ok(((a - b) / (a + b)).abs())
}

fn ratio(m: &GeneralizedMetric, tp: f64, fp: f64, fneg: f64, tn: f64) -> Option<f64> {
    let num = m.a0 + m.a11 * tp + m.a10 * fp + m.a01 * fneg + m.a00 * tn;
    let den = m.b0 + m.b11 * tp + m.b10 * fp + m.b01 * fneg + m.b00 * tn;
    (den.abs() > 1e-15).then(|| num / den)
}

/// Conditional metric value of the optimal decision at outcome `j`.
///
/// Given the outcome, the only decisions are "member" and "non-member"; their
/// conditional confusion masses are `(η, 1−η, 0, 0)` and `(0, 0, η, 1−η)`.
/// The better of the two is returned. Equal values mean the posterior sits on
/// the threshold, which is reported as a tie.
pub fn exact_generalized_conditional(
    toy: &FiniteToyDistribution,
    metric: &GeneralizedMetric,
    j: usize,
) -> Result<f64> {
    if metric.b11 != metric.b01 || metric.b10 != metric.b00 {
        return Err(Error::NoClosedFormThreshold);
    }
    let eta = toy.posterior(j)?;
    let say_member = ratio(metric, eta, 1.0 - eta, 0.0, 0.0);
    let say_nonmember = ratio(metric, 0.0, 0.0, eta, 1.0 - eta);
    match (say_member, say_nonmember) {
        (Some(a), Some(b)) if (a - b).abs() <= 1e-12 => Err(Error::ThresholdTie {
            posterior: eta,
            threshold: eta,
        }),
        (Some(a), Some(b)) => Ok(a.max(b)),
        (Some(a), None) => Ok(a),
        (None, Some(b)) => Ok(b),
        (None, None) => Err(Error::ZeroDenominator {
            tp: eta,
            fp: 1.0 - eta,
            fneg: 0.0,
            tn: 0.0,
        }),
    }
}

/// Best population metric value over all threshold classifiers on the
/// posterior, in either orientation.
///
/// A threshold rule predicts "member" on exactly the outcomes whose posterior
/// lies above (or below) the cutoff, so enumerating every prefix of the
/// outcomes sorted by posterior covers every threshold.
pub fn exact_best_threshold_value(toy: &FiniteToyDistribution, metric: &GeneralizedMetric) -> Result<f64> {
    let p = toy.prior;
    let mut order: Vec<usize> = (0..toy.outcomes()).collect();
    let eta: Vec<f64> = (0..toy.outcomes())
        .map(|j| toy.posterior(j).unwrap_or(p))
        .collect();
    order.sort_by(|&a, &b| eta[a].total_cmp(&eta[b]));

    let mut best: Option<f64> = None;
    for reverse in [false, true] {
        for k in 0..=order.len() {
            let chosen: Vec<usize> = if reverse {
                order[..k].to_vec()
            } else {
                order[order.len() - k..].to_vec()
            };
            let mut in_set = vec![false; toy.outcomes()];
            for &j in &chosen {
                in_set[j] = true;
            }
            let (mut tp, mut fp, mut fneg, mut tn) = (0.0, 0.0, 0.0, 0.0);
            for j in 0..toy.outcomes() {
                if in_set[j] {
                    tp += p * toy.member[j];
                    fp += (1.0 - p) * toy.nonmember[j];
                } else {
                    fneg += p * toy.member[j];
                    tn += (1.0 - p) * toy.nonmember[j];
                }
            }
            if let Some(v) = ratio(metric, tp, fp, fneg, tn) {
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best.ok_or(Error::MetricUndefinedEverywhere("toy distribution"))
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// ∫ |p·φ(x; μ₁, σ) − (1−p)·φ(x; μ₂, σ)| dx by quadrature.
pub fn normal_advantage_quadrature(mu1: f64, mu2: f64, sigma: f64, prior: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::invalid("prior_p", format!("{prior} is not in (0, 1)")));
    }
    let f = |x: f64| (prior * normal_pdf(x, mu1, sigma) - (1.0 - prior) * normal_pdf(x, mu2, sigma)).abs();
    let lo = mu1.min(mu2) - 12.0 * sigma;
    let hi = mu1.max(mu2) + 12.0 * sigma;
    // Split at the midpoint, where the integrand has its kink for p = 1/2.
    let mid = 0.5 * (mu1 + mu2);
    Ok(integrate(&f, lo, mid, 1e-12) + integrate(&f, mid, hi, 1e-12))
}

/// Optimal advantage between `N(μ₁, σ²)` and `N(μ₂, σ²)` at prior 1/2, i.e.
/// their total variation distance `2Φ(|μ₁−μ₂|/(2σ)) − 1`. The closed form is
/// cross-checked by quadrature.
pub fn continuous_truth_tv(mu1: f64, mu2: f64, sigma: f64) -> Result<f64> {
    let numeric = normal_advantage_quadrature(mu1, mu2, sigma, 0.5)?;
    let closed = 2.0 * normal_cdf((mu1 - mu2).abs() / (2.0 * sigma)) - 1.0;
    if (numeric - closed).abs() > 1e-8 {
        return Err(Error::Degenerate(format!(
            "quadrature {numeric} disagrees with closed form {closed}"
        )));
    }
    Ok(closed)
}

/// A distribution to draw synthetic query outputs from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ToySpec {
    /// Outcome `j` with probability `w[j]`, emitted as the scalar `j`.
    Categorical(Vec<f64>),
    /// Isotropic normal.
    Normal { mean: Vec<f64>, sigma: f64 },
}

impl ToySpec {
    pub fn normal(mean: f64, sigma: f64) -> Self {
        ToySpec::Normal {
            mean: vec![mean],
            sigma,
        }
    }
}

/// `n` i.i.d. draws from `spec`, reproducible from `seed`.
pub fn sample_toy(spec: &ToySpec, n: usize, seed: u64) -> Result<Vec<QueryOutput>> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one draw"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec {
        ToySpec::Categorical(w) => {
            let total: f64 = w.iter().sum();
            if w.is_empty() || w.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("pmf", "weights must be nonnegative and sum to 1"));
            }
            let last = w.iter().rposition(|&x| x > 0.0).unwrap_or(0);
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut j = last;
                    for (i, &x) in w.iter().enumerate() {
                        acc += x;
                        if u < acc {
                            j = i;
                            break;
                        }
                    }
                    QueryOutput::scalar(j as f64)
                })
                .collect()
        }
        ToySpec::Normal { mean, sigma } => {
            if mean.is_empty() || !(*sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::invalid("normal", "need a mean vector and sigma > 0"));
            }
            (0..n)
                .map(|_| {
                    let v = mean
                        .iter()
                        .map(|&m| m + sigma * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    QueryOutput::new(v)
                })
                .collect()
        }
    }
}
