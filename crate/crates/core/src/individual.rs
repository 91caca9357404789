//! Per-sample privacy risk.
//!
//! The accuracy-metric risk at a query point is `|f_p|`, where
//! `f_p = (p·P − (1−p)·Q) / (p·P + (1−p)·Q)` contrasts the member density `P`
//! and non-member density `Q` at that point. Plug-in estimates replace `P`
//! and `Q` with fitted densities; intervals come from pointwise density
//! intervals at level `1 − δ/2` each, so the pair holds jointly at `1 − δ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{check_compatible, ConfidenceInterval, DensityModel};
use crate::error::{Error, Result};
use crate::experiment::{check_delta, check_prior, QueryOutput};
use crate::metrics::GeneralizedMetric;

/// Posterior distance from the threshold below which condition 2 counts as
/// violated.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndividualRiskEstimate {
    pub point: f64,
    pub ci: ConfidenceInterval,
    /// Signed contrast `f̂_p` at the query point.
    pub f_p_signed: f64,
    pub query_point: QueryOutput,
    pub metric: GeneralizedMetric,
    /// Set when neither density has mass at the query point.
    #[serde(default)]
    pub uninformative: bool,
}

/// Plug-in `f_p` from the two density values at one point.
pub fn signed_contrast(member_density: f64, nonmember_density: f64, prior: f64) -> Result<f64> {
    let a = prior * member_density;
    let b = (1.0 - prior) * nonmember_density;
    if !(a + b > 0.0) {
        return Err(Error::ZeroMixtureMass);
    }
    Ok((a - b) / (a + b))
}

/// Range of `f_p` over the rectangle `[p_lo, p_hi] × [q_lo, q_hi]`, origin
/// excluded. `f_p` increases in the member density and decreases in the
/// non-member density, so the extremes sit on opposite corners. A corner at
/// the origin is replaced by the limit along the adjacent edge.
fn contrast_range(p: &ConfidenceInterval, q: &ConfidenceInterval, prior: f64) -> Result<(f64, f64)> {
    let lo = if q.upper <= 0.0 {
        if p.upper <= 0.0 {
            return Err(Error::ZeroMixtureMass);
        }
        1.0
    } else {
        signed_contrast(p.lower, q.upper, prior)?
    };
    let hi = if p.upper <= 0.0 { -1.0 } else { signed_contrast(p.upper, q.lower, prior)? };
    Ok((lo, hi))
}

/// Image of `[lo, hi]` under `|·|`.
pub fn abs_interval(lo: f64, hi: f64) -> (f64, f64) {
    if lo >= 0.0 {
        (lo, hi)
    } else if hi <= 0.0 {
        (-hi, -lo)
    } else {
        (0.0, lo.abs().max(hi.abs()))
    }
}

fn densities_at(z0: &QueryOutput, pdens: &DensityModel, qdens: &DensityModel, prior: f64) -> Result<(f64, f64)> {
    check_prior(prior)?;
    check_compatible(pdens, qdens)?;
    Ok((pdens.density_at(z0)?, qdens.density_at(z0)?))
}

/// Plug-in estimate of the signed contrast at `z0`.
pub fn f_p_hat(z0: &QueryOutput, pdens: &DensityModel, qdens: &DensityModel, prior: f64) -> Result<f64> {
    let (pm, qm) = densities_at(z0, pdens, qdens, prior)?;
    signed_contrast(pm, qm, prior)
}

/// Accuracy-metric risk `|f̂_p(z0)|` with a `(1 − δ)` interval.
pub fn individual_risk_accuracy(
    z0: &QueryOutput,
    pdens: &DensityModel,
    qdens: &DensityModel,
    prior: f64,
    delta: f64,
) -> Result<IndividualRiskEstimate> {
    check_delta(delta)?;
    let (pm, qm) = densities_at(z0, pdens, qdens, prior)?;
    let f = signed_contrast(pm, qm, prior)?;
    let level = 1.0 - delta / 2.0;
    let p_ci = pdens.interval_at(z0, level)?;
    let q_ci = qdens.interval_at(z0, level)?;
    let (lo, hi) = contrast_range(&p_ci, &q_ci, prior)?;
    let (lower, upper) = abs_interval(lo.min(f), hi.max(f));
    let point = f.abs();
    Ok(IndividualRiskEstimate {
        point,
        ci: ConfidenceInterval {
            lower: lower.min(point),
            upper: upper.max(point),
            level: 1.0 - delta,
        },
        f_p_signed: f,
        query_point: z0.clone(),
        metric: GeneralizedMetric::accuracy(),
        uninformative: false,
    })
}

/// One linear-fractional piece `(A0 + A1·η) / (B0 + B1·η)` of the generalized
/// risk as a function of the posterior `η`, with the indicator held fixed.
#[derive(Clone, Copy)]
struct Piece {
    a0: f64,
    a1: f64,
    b0: f64,
    b1: f64,
    indicator: bool,
}

const DEN_EPS: f64 = 1e-14;

impl Piece {
    fn new(metric: &GeneralizedMetric, indicator: bool) -> Self {
        let k = metric.derived();
        let i = if indicator { 1.0 } else { 0.0 };
        // c1·η + c2·(1−η) + I·(c3·η + c4·(1−η)), same for the d's.
        let num_at = |e: f64| k.c1 * e + k.c2 * (1.0 - e) + i * (k.c3 * e + k.c4 * (1.0 - e));
        let den_at = |e: f64| k.d1 * e + k.d2 * (1.0 - e) + i * (k.d3 * e + k.d4 * (1.0 - e));
        Piece {
            a0: num_at(0.0),
            a1: num_at(1.0) - num_at(0.0),
            b0: den_at(0.0),
            b1: den_at(1.0) - den_at(0.0),
            indicator,
        }
    }

    fn num(&self, eta: f64) -> f64 {
        self.a0 + self.a1 * eta
    }

    fn den(&self, eta: f64) -> f64 {
        self.b0 + self.b1 * eta
    }

    fn zero_denominator(&self, eta: f64) -> Error {
        let i = if self.indicator { 1.0 } else { 0.0 };
        Error::ZeroDenominator {
            tp: eta * i,
            fp: (1.0 - eta) * i,
            fneg: eta * (1.0 - i),
            tn: (1.0 - eta) * (1.0 - i),
        }
    }

    /// Minimum and maximum over `[l, r]`. A Möbius map is monotone away from
    /// its pole, so only the endpoints matter; a denominator vanishing at an
    /// endpoint together with the numerator is a removable singularity.
    fn range(&self, l: f64, r: f64) -> Result<(f64, f64)> {
        let (dl, dr) = (self.den(l), self.den(r));
        if dl.abs() <= DEN_EPS || dr.abs() <= DEN_EPS {
            let root = if dl.abs() <= DEN_EPS { l } else { r };
            if self.num(root).abs() <= DEN_EPS && self.b1.abs() > DEN_EPS {
                // num and den share the root, so the piece is constant.
                let v = self.a1 / self.b1;
                return Ok((v, v));
            }
            return Err(self.zero_denominator(root));
        }
        if dl.signum() != dr.signum() {
            return Err(self.zero_denominator(-self.b0 / self.b1));
        }
        let (vl, vr) = (self.num(l) / dl, self.num(r) / dr);
        Ok((vl.min(vr), vl.max(vr)))
    }
}

/// Generalized-metric risk at `z0` for a metric with a closed-form threshold,
/// with a `(1 − δ)` interval.
///
/// The point estimate applies the optimal decision at the estimated posterior
/// and returns the conditional metric value. The interval is the exact range
/// of that expression over the rectangle of density bounds: the expression
/// depends on the bounds only through the posterior, and is piecewise
/// linear-fractional in it with a single break at the threshold.
pub fn individual_risk_generalized(
    z0: &QueryOutput,
    pdens: &DensityModel,
    qdens: &DensityModel,
    prior: f64,
    metric: &GeneralizedMetric,
    delta: f64,
) -> Result<IndividualRiskEstimate> {
    check_delta(delta)?;
    let t = metric.bayes_threshold().ok_or(Error::NoClosedFormThreshold)?;
    let (pm, qm) = densities_at(z0, pdens, qdens, prior)?;
    let f = signed_contrast(pm, qm, prior)?;
    let big_p = pm * prior;
    let big_q = qm * (1.0 - prior);
    let eta = big_p / (big_p + big_q);
    if (eta - t).abs() < TIE_TOLERANCE && !metric.derived().indicator_free() {
        return Err(Error::ThresholdTie {
            posterior: eta,
            threshold: t,
        });
    }
    let indicator = (1.0 - t) * prior * pm > t * (1.0 - prior) * qm;
    let k = metric.derived();
    let i = if indicator { 1.0 } else { 0.0 };
    let num = k.c1 * big_p + k.c2 * big_q + i * (k.c3 * big_p + k.c4 * big_q);
    let den = k.d1 * big_p + k.d2 * big_q + i * (k.d3 * big_p + k.d4 * big_q);
    if (den / (big_p + big_q)).abs() <= DEN_EPS {
        return Err(Piece::new(metric, indicator).zero_denominator(eta));
    }
    let point = num / den;

    let level = 1.0 - delta / 2.0;
    let (lo, hi) = contrast_range(&pdens.interval_at(z0, level)?, &qdens.interval_at(z0, level)?, prior)?;
    let (eta_lo, eta_hi) = ((1.0 + lo.min(f)) / 2.0, (1.0 + hi.max(f)) / 2.0);
    let below = Piece::new(metric, false);
    let above = Piece::new(metric, true);
    let pieces: Vec<(Piece, f64, f64)> = if eta_hi <= t {
        vec![(below, eta_lo, eta_hi)]
    } else if eta_lo > t {
        vec![(above, eta_lo, eta_hi)]
    } else {
        vec![(below, eta_lo, t), (above, t, eta_hi)]
    };
    let (mut lower, mut upper) = (point, point);
    for (piece, l, r) in pieces {
        let (a, b) = piece.range(l, r)?;
        lower = lower.min(a);
        upper = upper.max(b);
    }
    Ok(IndividualRiskEstimate {
        point,
        ci: ConfidenceInterval {
            lower,
            upper,
            level: 1.0 - delta,
        },
        f_p_signed: f,
        query_point: z0.clone(),
        metric: metric.clone(),
        uninformative: false,
    })
}

/// Per-sample results for many query points, with one warning per point that
/// fell where neither density has mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskBatch {
    pub estimates: Vec<IndividualRiskEstimate>,
    pub warnings: Vec<String>,
}

/// Batch risk for many points, in input order. Points with zero mixture mass
/// get an uninformative result (point `|2p − 1|`, interval `[0, 1]`) and a
/// warning instead of aborting the batch. Passing a metric other than
/// accuracy selects the generalized estimator.
pub fn individual_risk_batch(
    points: &[QueryOutput],
    pdens: &DensityModel,
    qdens: &DensityModel,
    prior: f64,
    metric: Option<&GeneralizedMetric>,
    delta: f64,
) -> Result<RiskBatch> {
    check_delta(delta)?;
    check_prior(prior)?;
    check_compatible(pdens, qdens)?;
    let results: Vec<Result<IndividualRiskEstimate>> = points
        .par_iter()
        .map(|z| match metric {
            None => individual_risk_accuracy(z, pdens, qdens, prior, delta),
            Some(m) => individual_risk_generalized(z, pdens, qdens, prior, m, delta),
        })
        .collect();
    let mut estimates = Vec::with_capacity(points.len());
    let mut warnings = Vec::new();
    for (i, (z, r)) in points.iter().zip(results).enumerate() {
        match r {
            Ok(e) => estimates.push(e),
            Err(Error::ZeroMixtureMass) => {
                warnings.push(format!("point {i} ({z}): unseen by both densities, result uninformative"));
                estimates.push(IndividualRiskEstimate {
                    point: (2.0 * prior - 1.0).abs(),
                    ci: ConfidenceInterval {
                        lower: 0.0,
                        upper: 1.0,
                        level: 1.0 - delta,
                    },
                    f_p_signed: 2.0 * prior - 1.0,
                    query_point: z.clone(),
                    metric: metric.cloned().unwrap_or_else(GeneralizedMetric::accuracy),
                    uninformative: true,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RiskBatch { estimates, warnings })
}

/// Cap on any advantage achievable against an ε-differentially-private
/// mechanism at prior `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpBound {
    pub epsilon: f64,
    pub prior_p: f64,
    /// `ln(p / (1 − p))`.
    pub lambda: f64,
    pub bound: f64,
}

pub fn dp_bound(epsilon: f64, prior: f64) -> Result<DpBound> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", format!("{epsilon} is not a finite value ≥ 0")));
    }
    check_prior(prior)?;
    let lambda = (prior / (1.0 - prior)).ln();
    let bound = ((epsilon + lambda) / 2.0).tanh().abs().max(((-epsilon + lambda) / 2.0).tanh().abs());
    Ok(DpBound {
        epsilon,
        prior_p: prior,
        lambda,
        bound,
    })
}

/// An estimate set against a DP bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpComparison {
    pub bound: f64,
    pub estimate: f64,
    /// Lower end of the estimate's interval, when it has one.
    pub estimate_lower: Option<f64>,
    /// The point estimate exceeds the bound.
    pub point_exceeds: bool,
    /// Even the lower end exceeds the bound: evidence the mechanism is not
    /// ε-DP at this confidence.
    pub witness: bool,
}

impl DpBound {
    pub fn is_violated_by(&self, value: f64) -> bool {
        value > self.bound
    }

    pub fn compare(&self, estimate: f64, estimate_lower: Option<f64>) -> DpComparison {
        DpComparison {
            bound: self.bound,
            estimate,
            estimate_lower,
            point_exceeds: self.is_violated_by(estimate),
            witness: estimate_lower.is_some_and(|l| self.is_violated_by(l)),
        }
    }

    pub fn compare_risk(&self, risk: &IndividualRiskEstimate) -> DpComparison {
        self.compare(risk.point, Some(risk.ci.lower))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{fit_discrete, fit_kde, Bandwidth, Kernel};
    use crate::metrics::named_metric;
    use crate::oracle::{exact_generalized_conditional, FiniteToyDistribution};
    use proptest::prelude::*;

    fn q(v: f64) -> QueryOutput {
        QueryOutput::scalar(v).unwrap()
    }

    fn cells(counts: &[(f64, usize)]) -> DensityModel {
        let v: Vec<QueryOutput> = counts
            .iter()
            .flat_map(|&(x, k)| std::iter::repeat_n(q(x), k))
            .collect();
        DensityModel::Discrete(fit_discrete(&v, None).unwrap())
    }

    #[test]
    fn contrast_examples() {
        assert_eq!(signed_contrast(0.3, 0.3, 0.5).unwrap(), 0.0);
        assert!((signed_contrast(0.3, 0.3, 0.8).unwrap() - 0.6).abs() < 1e-12);
        assert!((signed_contrast(0.9, 0.1, 0.5).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(signed_contrast(0.0, 0.0, 0.5), Err(Error::ZeroMixtureMass)));
    }

    #[test]
    fn abs_interval_cases() {
        assert_eq!(abs_interval(0.2, 0.5), (0.2, 0.5));
        assert_eq!(abs_interval(-0.5, -0.2), (0.2, 0.5));
        assert_eq!(abs_interval(-0.7, 0.3), (0.0, 0.7));
    }

    #[test]
    fn unseen_member_cell_reaches_minus_one() {
        let p = cells(&[(0.0, 50)]);
        let qd = cells(&[(0.0, 10), (1.0, 40)]);
        let r = individual_risk_accuracy(&q(1.0), &p, &qd, 0.5, 0.05).unwrap();
        assert_eq!(r.f_p_signed, -1.0);
        assert_eq!(r.ci.upper, 1.0);
    }

    #[test]
    fn zero_width_kde_interval_collapses() {
        // A KDE at a point with no mass nearby has the interval [0, 0].
        let p = DensityModel::Kde(fit_kde(&[q(0.0)], Bandwidth::Fixed(0.1), Kernel::Epanechnikov).unwrap());
        let qd = DensityModel::Kde(fit_kde(&[q(5.0)], Bandwidth::Fixed(0.1), Kernel::Epanechnikov).unwrap());
        let r = individual_risk_accuracy(&q(0.0), &p, &qd, 0.5, 0.05).unwrap();
        assert_eq!(r.point, 1.0);
        assert!(r.ci.upper == 1.0);
    }

    #[test]
    fn accuracy_generalized_link() {
        let p = cells(&[(0.0, 70), (1.0, 30)]);
        let qd = cells(&[(0.0, 20), (1.0, 80)]);
        let acc = GeneralizedMetric::accuracy();
        for (x, prior) in [(0.0, 0.5), (1.0, 0.5), (0.0, 0.2), (1.0, 0.9)] {
            let a = individual_risk_accuracy(&q(x), &p, &qd, prior, 0.05).unwrap();
            let g = individual_risk_generalized(&q(x), &p, &qd, prior, &acc, 0.05).unwrap();
            assert!((2.0 * g.point - 1.0 - a.point).abs() < 1e-12);
            assert!(g.ci.contains(g.point));
        }
    }

    #[test]
    fn generalized_errors() {
        let p = cells(&[(0.0, 50), (1.0, 50)]);
        let qd = cells(&[(0.0, 50), (1.0, 50)]);
        let acc = GeneralizedMetric::accuracy();
        assert!(matches!(
            individual_risk_generalized(&q(0.0), &p, &qd, 0.5, &acc, 0.05),
            Err(Error::ThresholdTie { .. })
        ));
        let ppv = named_metric("PPV", 0.5).unwrap();
        assert!(matches!(
            individual_risk_generalized(&q(0.0), &p, &qd, 0.3, &ppv, 0.05),
            Err(Error::NoClosedFormThreshold)
        ));
        // TPR where the members never reach: η̂ = 0 = t, and TP + FN = 0.
        let p = cells(&[(0.0, 50)]);
        let tpr = named_metric("TPR", 0.5).unwrap();
        assert!(matches!(
            individual_risk_generalized(&q(1.0), &p, &qd, 0.5, &tpr, 0.05),
            Err(Error::ThresholdTie { .. })
        ));
    }

    #[test]
    fn tpr_on_favourable_cell() {
        let p = cells(&[(0.0, 90), (1.0, 10)]);
        let qd = cells(&[(0.0, 10), (1.0, 90)]);
        let tpr = named_metric("TPR", 0.5).unwrap();
        let r = individual_risk_generalized(&q(0.0), &p, &qd, 0.5, &tpr, 0.05).unwrap();
        assert_eq!(r.point, 1.0);
        let toy = FiniteToyDistribution::new(vec![0.9, 0.1], vec![0.1, 0.9], 0.5).unwrap();
        assert_eq!(exact_generalized_conditional(&toy, &tpr, 0).unwrap(), r.point);
    }

    #[test]
    fn am_matches_enumeration_on_exact_histogram() {
        // Histograms matching the pmfs exactly recover the oracle value.
        let p = cells(&[(0.0, 90), (1.0, 10)]);
        let qd = cells(&[(0.0, 10), (1.0, 90)]);
        let toy = FiniteToyDistribution::new(vec![0.9, 0.1], vec![0.1, 0.9], 0.3).unwrap();
        let am = named_metric("AM", 0.3).unwrap();
        for j in 0..2 {
            let r = individual_risk_generalized(&q(j as f64), &p, &qd, 0.3, &am, 0.05).unwrap();
            let truth = exact_generalized_conditional(&toy, &am, j).unwrap();
            assert!((r.point - truth).abs() < 1e-12, "cell {j}: {} vs {truth}", r.point);
        }
    }

    /// Brute force over a 101 × 101 grid of the density rectangle.
    fn grid_range(
        metric: &GeneralizedMetric,
        p_ci: &ConfidenceInterval,
        q_ci: &ConfidenceInterval,
        prior: f64,
    ) -> (f64, f64) {
        let t = metric.bayes_threshold().unwrap();
        let m = metric;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=100 {
            for j in 0..=100 {
                let pv = p_ci.lower + (p_ci.upper - p_ci.lower) * i as f64 / 100.0;
                let qv = q_ci.lower + (q_ci.upper - q_ci.lower) * j as f64 / 100.0;
                let (a, b) = (pv * prior, qv * (1.0 - prior));
                if a + b <= 0.0 {
                    continue;
                }
                let eta = a / (a + b);
                let say = (1.0 - t) * a > t * b;
                let (tp, fp, fneg, tn) = if say { (eta, 1.0 - eta, 0.0, 0.0) } else { (0.0, 0.0, eta, 1.0 - eta) };
                let num = m.a0 + m.a11 * tp + m.a10 * fp + m.a01 * fneg + m.a00 * tn;
                let den = m.b0 + m.b11 * tp + m.b10 * fp + m.b01 * fneg + m.b00 * tn;
                if den.abs() < 1e-12 {
                    continue;
                }
                lo = lo.min(num / den);
                hi = hi.max(num / den);
            }
        }
        (lo, hi)
    }

    #[test]
    fn generalized_interval_matches_grid_search() {
        let p = cells(&[(0.0, 60), (1.0, 40)]);
        let qd = cells(&[(0.0, 45), (1.0, 55)]);
        for name in ["ACC", "AM", "TPR", "TNR", "WA(2,1,1,2)"] {
            for prior in [0.3, 0.5, 0.7] {
                let metric = named_metric(name, prior).unwrap();
                for x in [0.0, 1.0] {
                    let z = q(x);
                    let r = match individual_risk_generalized(&z, &p, &qd, prior, &metric, 0.05) {
                        Ok(r) => r,
                        Err(Error::ThresholdTie { .. }) => continue,
                        Err(e) => panic!("{name} p={prior} x={x}: {e}"),
                    };
                    let p_ci = p.interval_at(&z, 0.975).unwrap();
                    let q_ci = qd.interval_at(&z, 0.975).unwrap();
                    let (glo, ghi) = grid_range(&metric, &p_ci, &q_ci, prior);
                    assert!(r.ci.lower <= glo + 1e-9 && r.ci.upper >= ghi - 1e-9, "{name}: {:?} vs ({glo}, {ghi})", r.ci);
                    // Exact extremes are attained on the closed rectangle.
                    assert!(r.ci.lower >= glo - 0.02 && r.ci.upper <= ghi + 0.02, "{name}: {:?} vs ({glo}, {ghi})", r.ci);
                }
            }
        }
    }

    #[test]
    fn batch_marks_unseen_points() {
        let p = cells(&[(0.0, 5), (1.0, 5)]);
        let qd = cells(&[(0.0, 8), (1.0, 2)]);
        let pts = vec![q(0.0), q(7.0), q(1.0)];
        let batch = individual_risk_batch(&pts, &p, &qd, 0.3, None, 0.05).unwrap();
        assert_eq!(batch.estimates.len(), 3);
        assert!(batch.estimates[1].uninformative);
        assert!((batch.estimates[1].point - 0.4).abs() < 1e-12);
        assert_eq!(batch.warnings.len(), 1);
        let single = individual_risk_accuracy(&q(1.0), &p, &qd, 0.3, 0.05).unwrap();
        assert_eq!(batch.estimates[2], single);
    }

    #[test]
    fn dp_bound_examples() {
        // Frozen: tanh(1/2) = 0.46211715726.
        assert!((dp_bound(1.0, 0.5).unwrap().bound - 0.462_117_157_26).abs() < 1e-10);
        assert_eq!(dp_bound(0.0, 0.5).unwrap().bound, 0.0);
        assert!((dp_bound(0.0, 0.9).unwrap().bound - 0.8).abs() < 1e-12);
        assert!(dp_bound(-1.0, 0.5).is_err());
        let b = dp_bound(1.0, 0.5).unwrap();
        assert!(b.is_violated_by(0.5));
        let c = b.compare(0.5, Some(0.4));
        assert!(c.point_exceeds && !c.witness);
    }

    proptest! {
        #[test]
        fn tanh_identity(pm in 1e-6f64..1.0, qm in 1e-6f64..1.0, prior in 0.01f64..0.99) {
            let f = signed_contrast(pm, qm, prior).unwrap();
            let t = (0.5 * (pm * prior / (qm * (1.0 - prior))).ln()).tanh();
            prop_assert!((f - t).abs() < 1e-12);
            prop_assert!(f.abs() <= 1.0);
        }

        #[test]
        fn contrast_increasing_in_ratio(qm in 0.01f64..1.0, prior in 0.01f64..0.99, r1 in 0.01f64..10.0, dr in 0.001f64..10.0) {
            let a = signed_contrast(r1 * qm, qm, prior).unwrap();
            let b = signed_contrast((r1 + dr) * qm, qm, prior).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn dp_bound_in_unit_interval(eps in 0.0f64..20.0, prior in 0.001f64..0.999) {
            let b = dp_bound(eps, prior).unwrap();
            prop_assert!(b.bound >= 0.0 && b.bound <= 1.0);
            // The constant predictor's advantage |2p − 1| is always allowed.
            prop_assert!(b.bound >= (2.0 * prior - 1.0).abs() - 1e-12);
        }

        #[test]
        fn risk_interval_contains_point(k1 in 0usize..40, k2 in 0usize..40, n1 in 40usize..80, n2 in 40usize..80, prior in 0.05f64..0.95) {
            let p = cells(&[(0.0, k1), (1.0, n1 - k1)]);
            let qd = cells(&[(0.0, k2), (1.0, n2 - k2)]);
            if k1 + k2 > 0 {
                let r = individual_risk_accuracy(&q(0.0), &p, &qd, prior, 0.05).unwrap();
                prop_assert!(r.ci.contains(r.point));
                prop_assert!(r.point <= 1.0 && r.ci.lower >= 0.0 && r.ci.upper <= 1.0);
                prop_assert_eq!(r.point, r.f_p_signed.abs());
            }
        }
    }
}
