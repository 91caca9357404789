//! Labeled query samples and the sampling procedure that produces them.
//!
//! A [`LabeledQuerySet`] is the empirical side of the membership experiment:
//! `N₁` query outputs of training members labeled `+1` and `N₂` outputs of
//! non-members labeled `−1`, together with the prior `p` that a presented
//! sample is a member.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default confidence parameter δ.
pub const DEFAULT_DELTA: f64 = 0.05;

/// Deterministic RNG for `(seed, stream)`. Distinct streams never overlap, so
/// work split into numbered chunks reproduces regardless of scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One output of a query function: a finite real vector of dimension ≥ 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QueryOutput(Vec<f64>);

impl QueryOutput {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("query output"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("query output"));
        }
        Ok(Self(values))
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for QueryOutput {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<QueryOutput> for Vec<f64> {
    fn from(q: QueryOutput) -> Self {
        q.0
    }
}

impl fmt::Display for QueryOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Checks that every output shares one dimension and returns it.
pub fn common_dim<'a>(outputs: impl IntoIterator<Item = &'a QueryOutput>) -> Result<Option<usize>> {
    let mut dim = None;
    for q in outputs {
        match dim {
            None => dim = Some(q.dim()),
            Some(d) if d != q.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: q.dim(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(dim)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MembershipLabel {
    Member,
    NonMember,
}

impl MembershipLabel {
    pub fn sign(self) -> i8 {
        match self {
            MembershipLabel::Member => 1,
            MembershipLabel::NonMember => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(MembershipLabel::Member),
            -1 => Some(MembershipLabel::NonMember),
            _ => None,
        }
    }

    pub fn is_member(self) -> bool {
        self == MembershipLabel::Member
    }
}

pub(crate) fn check_prior(prior: f64) -> Result<()> {
    if prior.is_finite() && prior > 0.0 && prior < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("prior", format!("{prior} is not in (0, 1)")))
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("{delta} is not in (0, 1)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub prior_p: f64,
    pub n_samples: usize,
    #[serde(default = "default_delta")]
    pub confidence_delta: f64,
    pub rng_seed: u64,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl ExperimentConfig {
    pub fn new(prior_p: f64, n_samples: usize, rng_seed: u64) -> Self {
        Self {
            prior_p,
            n_samples,
            confidence_delta: DEFAULT_DELTA,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_prior(self.prior_p)?;
        check_delta(self.confidence_delta)?;
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be positive"));
        }
        Ok(())
    }

    /// `(N₁, N₂)` with `N₁ = round(N·p)`, halves rounded up.
    pub fn class_sizes(&self) -> (usize, usize) {
        class_sizes(self.n_samples, self.prior_p)
    }
}

pub fn class_sizes(n: usize, prior: f64) -> (usize, usize) {
    let n1 = ((n as f64) * prior + 0.5).floor() as usize;
    let n1 = n1.min(n);
    (n1, n - n1)
}

/// Query outputs with membership labels and the experiment prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledQuerySet {
    samples: Vec<(QueryOutput, MembershipLabel)>,
    prior_p: f64,
    n_members: usize,
    n_nonmembers: usize,
    dim: usize,
}

impl LabeledQuerySet {
    /// Labels every member output `+1` and every non-member output `−1`,
    /// members first.
    pub fn from_parts(
        members: Vec<QueryOutput>,
        nonmembers: Vec<QueryOutput>,
        prior_p: f64,
    ) -> Result<Self> {
        let samples = members
            .into_iter()
            .map(|q| (q, MembershipLabel::Member))
            .chain(nonmembers.into_iter().map(|q| (q, MembershipLabel::NonMember)))
            .collect();
        Self::from_samples(samples, prior_p)
    }

    pub fn from_samples(samples: Vec<(QueryOutput, MembershipLabel)>, prior_p: f64) -> Result<Self> {
        check_prior(prior_p)?;
        let dim = common_dim(samples.iter().map(|(q, _)| q))?.ok_or(Error::Empty("labeled set"))?;
        let n_members = samples.iter().filter(|(_, m)| m.is_member()).count();
        let n_nonmembers = samples.len() - n_members;
        if n_members == 0 {
            return Err(Error::Empty("member sample"));
        }
        if n_nonmembers == 0 {
            return Err(Error::Empty("non-member sample"));
        }
        Ok(Self {
            samples,
            prior_p,
            n_members,
            n_nonmembers,
            dim,
        })
    }

    pub fn samples(&self) -> &[(QueryOutput, MembershipLabel)] {
        &self.samples
    }

    pub fn members(&self) -> impl Iterator<Item = &QueryOutput> + Clone {
        self.samples.iter().filter(|(_, m)| m.is_member()).map(|(q, _)| q)
    }

    pub fn nonmembers(&self) -> impl Iterator<Item = &QueryOutput> + Clone {
        self.samples.iter().filter(|(_, m)| !m.is_member()).map(|(q, _)| q)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &QueryOutput> + Clone {
        self.samples.iter().map(|(q, _)| q)
    }

    pub fn prior(&self) -> f64 {
        self.prior_p
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    pub fn n_nonmembers(&self) -> usize {
        self.n_nonmembers
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn draw(pool: &[QueryOutput], count: usize, rng: &mut ChaCha8Rng) -> Vec<QueryOutput> {
    (0..count)
        .map(|_| pool[rng.random_range(0..pool.len())].clone())
        .collect()
}

/// Runs the sampling experiment over the given pools: `N₁ = round(N·p)`
/// uniform draws with replacement from `members`, `N − N₁` from `nonmembers`.
pub fn build_labeled_set(
    members: &[QueryOutput],
    nonmembers: &[QueryOutput],
    cfg: &ExperimentConfig,
) -> Result<LabeledQuerySet> {
    cfg.validate()?;
    if members.is_empty() {
        return Err(Error::Empty("member pool"));
    }
    if nonmembers.is_empty() {
        return Err(Error::Empty("non-member pool"));
    }
    common_dim(members.iter().chain(nonmembers))?;
    let (n1, n2) = cfg.class_sizes();
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid(
            "n_samples",
            format!(
                "N={} with p={} leaves an empty class (N₁={n1}, N₂={n2})",
                cfg.n_samples, cfg.prior_p
            ),
        ));
    }
    let mut rng = stream_rng(cfg.rng_seed, 0);
    let drawn_members = draw(members, n1, &mut rng);
    let drawn_nonmembers = draw(nonmembers, n2, &mut rng);
    LabeledQuerySet::from_parts(drawn_members, drawn_nonmembers, cfg.prior_p)
}

/// Splits `set` into three disjoint partitions, stratified by label. Within
/// each class, partition sizes differ by at most one.
pub fn split_three_ways(
    set: &LabeledQuerySet,
    seed: u64,
) -> Result<[LabeledQuerySet; 3]> {
    if set.n_members() < 3 || set.n_nonmembers() < 3 {
        return Err(Error::SetTooSmall {
            members: set.n_members(),
            nonmembers: set.n_nonmembers(),
        });
    }
    let mut rng = stream_rng(seed, 1);
    let mut member_idx: Vec<usize> = Vec::with_capacity(set.n_members());
    let mut nonmember_idx: Vec<usize> = Vec::with_capacity(set.n_nonmembers());
    for (i, (_, m)) in set.samples().iter().enumerate() {
        if m.is_member() {
            member_idx.push(i);
        } else {
            nonmember_idx.push(i);
        }
    }
    member_idx.shuffle(&mut rng);
    nonmember_idx.shuffle(&mut rng);

    let mut parts: [Vec<(QueryOutput, MembershipLabel)>; 3] = Default::default();
    for (k, &i) in member_idx.iter().enumerate() {
        parts[k % 3].push(set.samples()[i].clone());
    }
    // Offset so that overall partition sizes also stay within one.
    let offset = member_idx.len() % 3;
    for (k, &i) in nonmember_idx.iter().enumerate() {
        parts[(k + offset) % 3].push(set.samples()[i].clone());
    }
    let [a, b, c] = parts;
    Ok([
        LabeledQuerySet::from_samples(a, set.prior())?,
        LabeledQuerySet::from_samples(b, set.prior())?,
        LabeledQuerySet::from_samples(c, set.prior())?,
    ])
}
