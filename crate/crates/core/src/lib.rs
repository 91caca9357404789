//! Membership-privacy risk estimation from samples of a query function's
//! outputs.
//!
//! Given query outputs for training members and non-members, the crate
//! estimates the optimal membership advantage (accuracy and generalized
//! metrics), per-sample risk with confidence intervals, and compares both
//! against the cap implied by ε-differential privacy.

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod density;
pub mod individual;
pub mod advantage;
pub mod queries;
pub mod oracle;
pub mod io;
pub mod audit;

pub use error::{Error, ErrorKind, Result};
pub use experiment::{build_labeled_set, split_three_ways, ExperimentConfig, LabeledQuerySet, MembershipLabel, QueryOutput};
pub use metrics::{named_metric, ConfusionRates, GeneralizedMetric, MetricName};
