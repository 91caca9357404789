//! Conditional densities of query outputs given membership, with pointwise
//! confidence intervals.
//!
//! Two estimators are provided: a histogram over cells (exact Clopper–Pearson
//! intervals per cell) and a kernel density estimate (plug-in normal
//! intervals). [`DensityModel`] wraps either so the risk estimators can treat
//! them uniformly.

mod binomial;
mod discrete;
mod kde;

pub use binomial::{beta_quantile, clopper_pearson};
pub use discrete::{
    discretize, distinct_count, fit_discrete, BinningScheme, Cell, DiscreteDensity, DEFAULT_BINS,
};
pub use kde::{
    fit_kde, kde_pointwise_ci, normal_quantile, scott_bandwidth, Bandwidth, KdeConfig, KdeDensity, Kernel,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{LabeledQuerySet, QueryOutput};

/// Highest query dimension accepted by the density-based estimators.
pub const MAX_DENSITY_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DensityModel {
    Discrete(DiscreteDensity),
    Kde(KdeDensity),
}

impl DensityModel {
    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Discrete(d) => d.dim(),
            DensityModel::Kde(k) => k.dim(),
        }
    }

    /// Cell mass or density value at `x`.
    pub fn density_at(&self, x: &QueryOutput) -> Result<f64> {
        match self {
            DensityModel::Discrete(d) => d.mass_at(x),
            DensityModel::Kde(k) => k.evaluate(x),
        }
    }

    /// Pointwise interval at the given two-sided level: Clopper–Pearson on the
    /// cell count, or the KDE plug-in interval.
    pub fn interval_at(&self, x: &QueryOutput, level: f64) -> Result<ConfidenceInterval> {
        match self {
            DensityModel::Discrete(d) => clopper_pearson(d.count(&d.cell_of(x)?), d.n(), level),
            DensityModel::Kde(k) => kde_pointwise_ci(k, x, level),
        }
    }
}

/// Errors unless both models are of one kind over one scheme and dimension.
pub fn check_compatible(p: &DensityModel, q: &DensityModel) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    match (p, q) {
        (DensityModel::Discrete(a), DensityModel::Discrete(b)) if a.scheme() == b.scheme() => Ok(()),
        (DensityModel::Kde(_), DensityModel::Kde(_)) => Ok(()),
        _ => Err(Error::invalid(
            "densities",
            "member and non-member densities must share one estimator and binning scheme",
        )),
    }
}

/// How to estimate the conditional densities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DensitySpec {
    /// Histogram. `bins: None` treats each distinct output as its own cell.
    Discrete { bins: Option<usize> },
    Continuous(KdeConfig),
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec::Discrete {
            bins: Some(DEFAULT_BINS),
        }
    }
}

impl DensitySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DensitySpec::Discrete { bins: Some(b) } if *b < 2 => {
                Err(Error::invalid("bins", "need at least 2 bins per dimension"))
            }
            DensitySpec::Continuous(KdeConfig {
                bandwidth: Bandwidth::Fixed(h),
                ..
            }) if !(h.is_finite() && *h > 0.0) => Err(Error::invalid("bandwidth", "must be positive")),
            _ => Ok(()),
        }
    }
}

/// Member and non-member densities fitted on one labeled set with a shared
/// scheme (histograms) or a shared bandwidth (KDE). Automatic bandwidths and
/// bin ranges come from the pooled sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityPair {
    pub members: DensityModel,
    pub nonmembers: DensityModel,
}

impl DensityPair {
    pub fn fit(set: &LabeledQuerySet, spec: &DensitySpec) -> Result<Self> {
        spec.validate()?;
        if set.dim() > MAX_DENSITY_DIM {
            return Err(Error::DimensionTooHigh(set.dim()));
        }
        let members: Vec<QueryOutput> = set.members().cloned().collect();
        let nonmembers: Vec<QueryOutput> = set.nonmembers().cloned().collect();
        match *spec {
            DensitySpec::Discrete { bins } => {
                let scheme = bins.map(|b| BinningScheme::fit(set.outputs(), b)).transpose()?;
                Ok(Self {
                    members: DensityModel::Discrete(fit_discrete(&members, scheme.as_ref())?),
                    nonmembers: DensityModel::Discrete(fit_discrete(&nonmembers, scheme.as_ref())?),
                })
            }
            DensitySpec::Continuous(KdeConfig { bandwidth, kernel }) => {
                let h = match bandwidth {
                    Bandwidth::Auto => {
                        let pooled: Vec<QueryOutput> = set.outputs().cloned().collect();
                        scott_bandwidth(&pooled)?
                    }
                    Bandwidth::Fixed(h) => vec![h; set.dim()],
                };
                Ok(Self {
                    members: DensityModel::Kde(KdeDensity::with_bandwidth(&members, h.clone(), kernel)?),
                    nonmembers: DensityModel::Kde(KdeDensity::with_bandwidth(&nonmembers, h, kernel)?),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QueryOutput {
        QueryOutput::scalar(v).unwrap()
    }

    #[test]
    fn pair_shares_scheme() {
        let set = LabeledQuerySet::from_parts(vec![q(0.0), q(0.2)], vec![q(0.9), q(1.0)], 0.5).unwrap();
        let pair = DensityPair::fit(&set, &DensitySpec::Discrete { bins: Some(10) }).unwrap();
        check_compatible(&pair.members, &pair.nonmembers).unwrap();
        assert_eq!(pair.members.density_at(&q(0.05)).unwrap(), 0.5);
        assert_eq!(pair.nonmembers.density_at(&q(0.05)).unwrap(), 0.0);
        let ci = pair.nonmembers.interval_at(&q(0.05), 0.95).unwrap();
        assert_eq!(ci.lower, 0.0);
    }

    #[test]
    fn mixed_kinds_are_incompatible() {
        let set = LabeledQuerySet::from_parts(vec![q(0.0), q(0.2)], vec![q(0.9), q(1.0)], 0.5).unwrap();
        let d = DensityPair::fit(&set, &DensitySpec::Discrete { bins: None }).unwrap();
        let k = DensityPair::fit(&set, &DensitySpec::Continuous(KdeConfig::default())).unwrap();
        assert!(check_compatible(&d.members, &k.nonmembers).is_err());
    }

    #[test]
    fn high_dimensional_queries_rejected() {
        let wide = |v: f64| QueryOutput::new(vec![v; 4]).unwrap();
        let set = LabeledQuerySet::from_parts(vec![wide(0.0)], vec![wide(1.0)], 0.5).unwrap();
        assert!(matches!(
            DensityPair::fit(&set, &DensitySpec::default()),
            Err(Error::DimensionTooHigh(4))
        ));
    }

    #[test]
    fn spec_json_shape() {
        let spec = DensitySpec::Continuous(KdeConfig::default());
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"continuous","bandwidth":"auto","kernel":"gaussian"}"#);
        let spec: DensitySpec = serde_json::from_str(r#"{"kind":"discrete","bins":20}"#).unwrap();
        assert_eq!(spec, DensitySpec::Discrete { bins: Some(20) });
    }
}
