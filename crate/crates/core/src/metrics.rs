//! Linear-fractional classification metrics
//!
//! ```text
//!        a0 + a11·TP + a10·FP + a01·FN + a00·TN
//!   ℓ = ----------------------------------------
//!        b0 + b11·TP + b10·FP + b01·FN + b00·TN
//! ```
//!
//! where TP, FP, FN, TN are joint probabilities of (prediction, membership).
//! Accuracy, precision, recall, specificity, weighted accuracy and the
//! arithmetic mean of TPR/TNR are all members of this family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::check_prior;

const ZERO_DENOMINATOR: f64 = 1e-15;

/// Coefficients of a generalized metric, serialized as a flat record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedMetric {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub a0: f64,
    pub a11: f64,
    pub a10: f64,
    pub a01: f64,
    pub a00: f64,
    pub b0: f64,
    pub b11: f64,
    pub b10: f64,
    pub b01: f64,
    pub b00: f64,
}

/// Constants that appear when the metric is conditioned on a single query
/// output: `c₁ = a0+a01`, `c₂ = a0+a00`, `c₃ = a11−a01`, `c₄ = a10−a00`, and
/// likewise `d₁..d₄` for the denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl DerivedConstants {
    /// True when the indicator terms drop out and no threshold tie can
    /// change the value.
    pub fn indicator_free(&self) -> bool {
        self.c3 == 0.0 && self.c4 == 0.0 && self.d3 == 0.0 && self.d4 == 0.0
    }
}

/// Joint (prediction, membership) masses. `fneg` is the false-negative mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fneg: f64,
    pub tn: f64,
}

impl ConfusionRates {
    pub fn new(tp: f64, fp: f64, fneg: f64, tn: f64) -> Result<Self> {
        let all = [tp, fp, fneg, tn];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("rates", "rates must be finite and nonnegative"));
        }
        let total: f64 = all.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("rates", format!("rates sum to {total}, not 1")));
        }
        Ok(Self { tp, fp, fneg, tn })
    }

    /// Normalizes raw confusion counts.
    pub fn from_counts(tp: u64, fp: u64, fneg: u64, tn: u64) -> Result<Self> {
        let total = (tp + fp + fneg + tn) as f64;
        if total == 0.0 {
            return Err(Error::Empty("confusion counts"));
        }
        Ok(Self {
            tp: tp as f64 / total,
            fp: fp as f64 / total,
            fneg: fneg as f64 / total,
            tn: tn as f64 / total,
        })
    }
}

/// The named instances of the family.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricName {
    Accuracy,
    Precision,
    Recall,
    Specificity,
    /// Weighted accuracy `(w1·TP + w2·TN) / (w1·TP + w2·TN + w3·FP + w4·FN)`.
    Weighted([f64; 4]),
    /// `½(TPR + TNR)`, which depends on the prior.
    ArithmeticMean,
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let name = match upper.as_str() {
            "ACC" => MetricName::Accuracy,
            "PPV" => MetricName::Precision,
            "TPR" => MetricName::Recall,
            "TNR" => MetricName::Specificity,
            "AM" => MetricName::ArithmeticMean,
            "WA" => MetricName::Weighted([1.0; 4]),
            other => {
                let inner = other
                    .strip_prefix("WA(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .ok_or_else(|| Error::UnknownMetric(s.to_string()))?;
                let weights: Vec<f64> = inner
                    .split(',')
                    .map(|w| w.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::UnknownMetric(s.to_string()))?;
                let weights: [f64; 4] = weights
                    .try_into()
                    .map_err(|_| Error::UnknownMetric(s.to_string()))?;
                if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                    return Err(Error::invalid("WA weights", "weights must be positive"));
                }
                MetricName::Weighted(weights)
            }
        };
        Ok(name)
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricName::Accuracy => f.write_str("ACC"),
            MetricName::Precision => f.write_str("PPV"),
            MetricName::Recall => f.write_str("TPR"),
            MetricName::Specificity => f.write_str("TNR"),
            MetricName::ArithmeticMean => f.write_str("AM"),
            MetricName::Weighted(w) => write!(f, "WA({},{},{},{})", w[0], w[1], w[2], w[3]),
        }
    }
}

/// Builds a named metric. The prior only matters for AM.
pub fn named_metric(name: &str, prior_p: f64) -> Result<GeneralizedMetric> {
    let parsed: MetricName = name.parse()?;
    GeneralizedMetric::named(&parsed, prior_p)
}

impl GeneralizedMetric {
    fn zero(name: Option<String>) -> Self {
        Self {
            name,
            a0: 0.0,
            a11: 0.0,
            a10: 0.0,
            a01: 0.0,
            a00: 0.0,
            b0: 0.0,
            b11: 0.0,
            b10: 0.0,
            b01: 0.0,
            b00: 0.0,
        }
    }

    pub fn named(name: &MetricName, prior_p: f64) -> Result<Self> {
        let mut m = Self::zero(Some(name.to_string()));
        match *name {
            MetricName::Accuracy => {
                m.a11 = 1.0;
                m.a00 = 1.0;
                m.b11 = 1.0;
                m.b10 = 1.0;
                m.b01 = 1.0;
                m.b00 = 1.0;
            }
            MetricName::Precision => {
                m.a11 = 1.0;
                m.b11 = 1.0;
                m.b10 = 1.0;
            }
            MetricName::Recall => {
                m.a11 = 1.0;
                m.b11 = 1.0;
                m.b01 = 1.0;
            }
            MetricName::Specificity => {
                m.a00 = 1.0;
                m.b10 = 1.0;
                m.b00 = 1.0;
            }
            MetricName::Weighted([w1, w2, w3, w4]) => {
                m.a11 = w1;
                m.a00 = w2;
                m.b11 = w1;
                m.b00 = w2;
                m.b10 = w3;
                m.b01 = w4;
            }
            MetricName::ArithmeticMean => {
                check_prior(prior_p)?;
                m.a11 = 1.0 / (2.0 * prior_p);
                m.a00 = 1.0 / (2.0 * (1.0 - prior_p));
                m.b0 = 1.0;
            }
        }
        Ok(m)
    }

    pub fn accuracy() -> Self {
        Self::named(&MetricName::Accuracy, 0.5).expect("accuracy needs no prior")
    }

    /// A user-defined metric. Rejected when the denominator, which is linear
    /// on the probability simplex, vanishes identically or changes sign
    /// inside it. Zeros on the boundary (as for PPV) are reported later by
    /// [`GeneralizedMetric::evaluate`].
    pub fn custom(numerator: [f64; 5], denominator: [f64; 5]) -> Result<Self> {
        let all = numerator.iter().chain(&denominator);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("metric coefficients"));
        }
        let [a0, a11, a10, a01, a00] = numerator;
        let [b0, b11, b10, b01, b00] = denominator;
        let vertices = [b0 + b11, b0 + b10, b0 + b01, b0 + b00];
        let min = vertices.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vertices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if (min < 0.0 && max > 0.0) || (min == 0.0 && max == 0.0) {
            return Err(Error::invalid(
                "metric",
                "denominator vanishes inside the probability simplex",
            ));
        }
        Ok(Self {
            name: None,
            a0,
            a11,
            a10,
            a01,
            a00,
            b0,
            b11,
            b10,
            b01,
            b00,
        })
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("custom")
    }

    pub fn derived(&self) -> DerivedConstants {
        DerivedConstants {
            c1: self.a0 + self.a01,
            c2: self.a0 + self.a00,
            c3: self.a11 - self.a01,
            c4: self.a10 - self.a00,
            d1: self.b0 + self.b01,
            d2: self.b0 + self.b00,
            d3: self.b11 - self.b01,
            d4: self.b10 - self.b00,
        }
    }

    pub fn evaluate(&self, rates: &ConfusionRates) -> Result<f64> {
        let ConfusionRates { tp, fp, fneg, tn } = *rates;
        let num = self.a0 + self.a11 * tp + self.a10 * fp + self.a01 * fneg + self.a00 * tn;
        let den = self.b0 + self.b11 * tp + self.b10 * fp + self.b01 * fneg + self.b00 * tn;
        if den.abs() < ZERO_DENOMINATOR {
            return Err(Error::ZeroDenominator { tp, fp, fneg, tn });
        }
        Ok(num / den)
    }

    /// Closed-form Bayes threshold `t` for the classifier `sgn(η − t)`.
    ///
    /// Exists when `b11 = b01` and `b10 = b00` (the denominator is then
    /// constant given the prior) and the classifier predicts "member" above
    /// the threshold. Returns `None` otherwise; callers fall back to the
    /// empirical threshold search.
    pub fn bayes_threshold(&self) -> Option<f64> {
        let same = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
        if !same(self.b11, self.b01) || !same(self.b10, self.b00) {
            return None;
        }
        let slope = self.a11 - self.a10 - self.a01 + self.a00;
        if slope <= 0.0 || !slope.is_finite() {
            return None;
        }
        let t = (self.a00 - self.a10) / slope;
        (0.0..=1.0).contains(&t).then_some(t)
    }
}
