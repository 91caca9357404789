use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or configuration, detected before touching data.
    Validation,
    /// Malformed, missing or degenerate input data.
    Data,
    /// A numerical condition required by an estimator does not hold.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("labeled set too small to split three ways: {members} members, {nonmembers} non-members (need at least 3 of each)")]
    SetTooSmall { members: usize, nonmembers: usize },

    #[error("query dimension {0} is above the supported maximum of 3 for density-based estimation")]
    DimensionTooHigh(usize),

    #[error("outputs look continuous ({distinct} distinct values in {total}); supply a binning scheme")]
    ContinuousWithoutScheme { distinct: usize, total: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("metric denominator is zero at rates tp={tp}, fp={fp}, fn={fneg}, tn={tn}")]
    ZeroDenominator { tp: f64, fp: f64, fneg: f64, tn: f64 },

    #[error("both conditional densities vanish at the query point")]
    ZeroMixtureMass,

    #[error("metric has no closed-form Bayes threshold; use the empirical threshold search")]
    NoClosedFormThreshold,

    #[error("estimated posterior {posterior} ties the Bayes threshold {threshold}")]
    ThresholdTie { posterior: f64, threshold: f64 },

    #[error("metric is undefined at every candidate threshold on the {0} partition")]
    MetricUndefinedEverywhere(&'static str),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. } | Error::UnknownMetric(_) => ErrorKind::Validation,
            Error::Empty(_)
            | Error::NonFinite(_)
            | Error::DimensionMismatch { .. }
            | Error::SetTooSmall { .. }
            | Error::DimensionTooHigh(_)
            | Error::ContinuousWithoutScheme { .. }
            | Error::Degenerate(_)
            | Error::Parse { .. }
            | Error::Io { .. } => ErrorKind::Data,
            Error::ZeroDenominator { .. }
            | Error::ZeroMixtureMass
            | Error::NoClosedFormThreshold
            | Error::ThresholdTie { .. }
            | Error::MetricUndefinedEverywhere(_) => ErrorKind::Numerical,
            Error::Stage { source, .. } => source.kind(),
        }
    }
}
