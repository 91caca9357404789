use statrs::function::beta::beta_reg;

use super::ConfidenceInterval;
use crate::error::{Error, Result};

const QUANTILE_TOL: f64 = 1e-10;

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta
/// function.
pub fn beta_quantile(prob: f64, a: f64, b: f64) -> f64 {
    if prob <= 0.0 {
        return 0.0;
    }
    if prob >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > QUANTILE_TOL {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper–Pearson) interval for a binomial proportion at the given
/// two-sided confidence level.
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> Result<ConfidenceInterval> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    if successes > trials {
        return Err(Error::invalid(
            "successes",
            format!("{successes} successes exceed {trials} trials"),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("{level} is not in (0, 1)")));
    }
    let alpha = 1.0 - level;
    let (k, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, k, n - k + 1.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, k + 1.0, n - k)
    };
    // Bisection tolerance must not push an endpoint past the estimate.
    let phat = k / n;
    Ok(ConfidenceInterval {
        lower: lower.min(phat),
        upper: upper.max(phat),
        level,
    })
}
