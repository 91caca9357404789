use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ConfidenceInterval;
use crate::error::{Error, Result};
use crate::experiment::{common_dim, QueryOutput};

/// Gaussian terms beyond this many bandwidths are dropped (relative weight
/// below e^-32).
const GAUSSIAN_CUTOFF: f64 = 8.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    /// One-dimensional profile `K(u)`.
    pub fn profile(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫K²` of the one-dimensional profile.
    pub fn roughness_1d(self) -> f64 {
        match self {
            Kernel::Gaussian => 1.0 / (2.0 * PI.sqrt()),
            Kernel::Epanechnikov => 0.6,
        }
    }

    fn support_radius(self) -> f64 {
        match self {
            Kernel::Gaussian => GAUSSIAN_CUTOFF,
            Kernel::Epanechnikov => 1.0,
        }
    }

    /// Draws from the one-dimensional kernel density.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Kernel::Gaussian => rng.sample(StandardNormal),
            Kernel::Epanechnikov => {
                // Median-of-three construction for the Epanechnikov law.
                let u1: f64 = rng.random_range(-1.0..1.0);
                let u2: f64 = rng.random_range(-1.0..1.0);
                let u3: f64 = rng.random_range(-1.0..1.0);
                if u3.abs() >= u2.abs() && u3.abs() >= u1.abs() {
                    u2
                } else {
                    u3
                }
            }
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(Error::invalid("kernel", format!("unsupported kernel `{other}`"))),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
        })
    }
}

/// Bandwidth choice: Scott's rule or a fixed value for every dimension.
/// Serialized as `"auto"` or a number.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Bandwidth {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for Bandwidth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bandwidth::Auto => s.serialize_str("auto"),
            Bandwidth::Fixed(h) => s.serialize_f64(*h),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(h) => Bandwidth::from_str(&h.to_string()),
            Raw::Text(s) => Bandwidth::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bandwidth::Auto);
        }
        let h: f64 = s
            .parse()
            .map_err(|_| Error::invalid("bandwidth", format!("`{s}` is neither `auto` nor a number")))?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid("bandwidth", "must be positive"));
        }
        Ok(Bandwidth::Fixed(h))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    #[serde(default)]
    pub bandwidth: Bandwidth,
    #[serde(default)]
    pub kernel: Kernel,
}

/// Scott's rule, per dimension: `σ̂ₖ · n^(−1/(d+4))`.
pub fn scott_bandwidth(outputs: &[QueryOutput]) -> Result<Vec<f64>> {
    let dim = common_dim(outputs)?.ok_or(Error::Empty("bandwidth sample"))?;
    let n = outputs.len();
    if n < 2 {
        return Err(Error::Degenerate(
            "automatic bandwidth needs at least two outputs; use the discrete estimator".into(),
        ));
    }
    let factor = (n as f64).powf(-1.0 / (dim as f64 + 4.0));
    (0..dim)
        .map(|k| {
            let mean = outputs.iter().map(|q| q.values()[k]).sum::<f64>() / n as f64;
            let var = outputs
                .iter()
                .map(|q| (q.values()[k] - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            let h = var.sqrt() * factor;
            if h > 0.0 {
                Ok(h)
            } else {
                Err(Error::Degenerate(format!(
                    "all outputs share one value in dimension {k}; use the discrete estimator"
                )))
            }
        })
        .collect()
}

/// Product-kernel density estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeDensity {
    kernel: Kernel,
    dim: usize,
    bandwidth: Vec<f64>,
    /// Row-major support points, sorted by the first coordinate.
    support: Vec<f64>,
}

/// Fits a KDE. With [`Bandwidth::Auto`] the bandwidth follows Scott's rule
/// on `outputs`.
pub fn fit_kde(outputs: &[QueryOutput], bandwidth: Bandwidth, kernel: Kernel) -> Result<KdeDensity> {
    let dim = common_dim(outputs)?.ok_or(Error::Empty("density sample"))?;
    let h = match bandwidth {
        Bandwidth::Auto => scott_bandwidth(outputs)?,
        Bandwidth::Fixed(h) => vec![h; dim],
    };
    KdeDensity::with_bandwidth(outputs, h, kernel)
}

impl KdeDensity {
    pub fn with_bandwidth(outputs: &[QueryOutput], bandwidth: Vec<f64>, kernel: Kernel) -> Result<Self> {
        let dim = common_dim(outputs)?.ok_or(Error::Empty("density sample"))?;
        if bandwidth.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bandwidth.len(),
            });
        }
        if bandwidth.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::invalid("bandwidth", "must be positive"));
        }
        let mut rows: Vec<&[f64]> = outputs.iter().map(|q| q.values()).collect();
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        Ok(Self {
            kernel,
            dim,
            bandwidth,
            support: rows.concat(),
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.support.len() / self.dim
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    /// `hᵈ`, generalized to the product of per-dimension bandwidths.
    pub fn bandwidth_volume(&self) -> f64 {
        self.bandwidth.iter().product()
    }

    /// `μ_K = ∫K²` of the product kernel.
    pub fn mu_k(&self) -> f64 {
        self.kernel.roughness_1d().powi(self.dim as i32)
    }

    pub fn support_point(&self, i: usize) -> &[f64] {
        &self.support[i * self.dim..(i + 1) * self.dim]
    }

    fn first_coordinate(&self, i: usize) -> f64 {
        self.support[i * self.dim]
    }

    /// Index range of support points whose first coordinate lies within the
    /// kernel radius of `x0`.
    fn window(&self, x0: f64) -> (usize, usize) {
        let r = self.kernel.support_radius() * self.bandwidth[0];
        let n = self.n();
        let lower = partition_point(n, |i| self.first_coordinate(i) < x0 - r);
        let upper = partition_point(n, |i| self.first_coordinate(i) <= x0 + r);
        (lower, upper)
    }

    /// Density at `x`. Panics on a dimension mismatch; see
    /// [`KdeDensity::evaluate`] for the checked form.
    pub fn density(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "evaluation point has the wrong dimension");
        let (lo, hi) = self.window(x[0]);
        let mut sum = 0.0;
        match self.kernel {
            Kernel::Gaussian => {
                let inv: Vec<f64> = self.bandwidth.iter().map(|h| 1.0 / h).collect();
                for i in lo..hi {
                    let row = self.support_point(i);
                    let mut sq = 0.0;
                    for k in 0..self.dim {
                        let u = (x[k] - row[k]) * inv[k];
                        sq += u * u;
                    }
                    sum += (-0.5 * sq).exp();
                }
                sum *= (2.0 * PI).powf(-0.5 * self.dim as f64);
            }
            Kernel::Epanechnikov => {
                for i in lo..hi {
                    let row = self.support_point(i);
                    let mut prod = 1.0;
                    for k in 0..self.dim {
                        prod *= Kernel::Epanechnikov.profile((x[k] - row[k]) / self.bandwidth[k]);
                        if prod == 0.0 {
                            break;
                        }
                    }
                    sum += prod;
                }
            }
        }
        sum / (self.n() as f64 * self.bandwidth_volume())
    }

    pub fn evaluate(&self, x: &QueryOutput) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        Ok(self.density(x.values()))
    }

    /// Adds kernel noise, scaled per dimension, to support point `i`.
    pub fn perturb<R: Rng + ?Sized>(&self, i: usize, rng: &mut R, out: &mut [f64]) {
        let row = self.support_point(i);
        for k in 0..self.dim {
            out[k] = row[k] + self.bandwidth[k] * self.kernel.sample(rng);
        }
    }
}

fn partition_point(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Standard normal quantile.
pub fn normal_quantile(prob: f64) -> f64 {
    Normal::standard().inverse_cdf(prob)
}

/// Plug-in pointwise interval `p̂(x) ± z·√(μ_K·p̂(x)/(n·hᵈ))`, with the
/// normal quantile taken at `1 − (1 − level)/2` and the lower end clamped
/// at zero.
pub fn kde_pointwise_ci(kde: &KdeDensity, x: &QueryOutput, level: f64) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("{level} is not in (0, 1)")));
    }
    let estimate = kde.evaluate(x)?;
    Ok(kde_interval(kde, estimate, level))
}

pub(crate) fn kde_interval(kde: &KdeDensity, estimate: f64, level: f64) -> ConfidenceInterval {
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    let half = z * (kde.mu_k() * estimate / (kde.n() as f64 * kde.bandwidth_volume())).sqrt();
    ConfidenceInterval {
        lower: (estimate - half).max(0.0),
        upper: estimate + half,
        level,
    }
}
