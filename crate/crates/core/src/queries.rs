//! Query functions for released synthetic data.
//!
//! A sample's query output is computed from its relation to the released
//! synthetic set: the distance to its nearest synthetic neighbour, or a
//! log-distance score over synthetic points inside an ε-ball. Scores that
//! arrive from elsewhere can be concatenated or reduced to their maximum.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::QueryOutput;

/// Distances are floored here before taking the logarithm.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    L2,
    L1,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            DistanceMetric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "euclidean" => Ok(DistanceMetric::L2),
            "l1" | "manhattan" => Ok(DistanceMetric::L1),
            other => Err(Error::invalid("distance", format!("unknown metric `{other}` (expected l2 or l1)"))),
        }
    }
}

/// Released synthetic vectors `g₁..gₙ`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    data: Vec<f64>,
    dim: usize,
}

impl SyntheticDataset {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors.first().ok_or(Error::Empty("synthetic dataset"))?.len();
        if dim == 0 {
            return Err(Error::Empty("synthetic vector"));
        }
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("synthetic vector"));
            }
            data.extend_from_slice(v);
        }
        Ok(Self { data, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: z.len(),
            });
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("query sample"));
        }
        Ok(())
    }
}

/// `min_j d(z, g_j)` by a full scan.
pub fn nn_distance_query(z: &[f64], syn: &SyntheticDataset, d: DistanceMetric) -> Result<QueryOutput> {
    syn.check(z)?;
    let best = syn.iter().map(|g| d.distance(z, g)).fold(f64::INFINITY, f64::min);
    QueryOutput::scalar(best)
}

/// Exact nearest-neighbour index over a synthetic set.
///
/// Splits on the widest axis at the median. Pruning compares the best
/// distance so far against the gap to the splitting plane, which lower-bounds
/// both L1 and L2 distances, so answers match a full scan.
pub struct KdTree<'a> {
    syn: &'a SyntheticDataset,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

const LEAF_SIZE: usize = 16;

impl<'a> KdTree<'a> {
    pub fn build(syn: &'a SyntheticDataset) -> Self {
        let mut tree = KdTree {
            syn,
            nodes: Vec::new(),
            order: (0..syn.len()).collect(),
        };
        tree.build_node(0, syn.len());
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let syn = self.syn;
        let axis = (0..syn.dim)
            .max_by(|&a, &b| {
                let spread = |k: usize| {
                    let (lo, hi) = self.order[start..end]
                        .iter()
                        .map(|&i| syn.get(i)[k])
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
                    hi - lo
                };
                spread(a).total_cmp(&spread(b))
            })
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| syn.get(a)[axis].total_cmp(&syn.get(b)[axis]));
        let value = syn.get(self.order[mid])[axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn nearest(&self, z: &[f64], d: DistanceMetric) -> Result<f64> {
        self.syn.check(z)?;
        let mut best = f64::INFINITY;
        self.search(0, z, d, &mut best);
        Ok(best)
    }

    fn search(&self, node: usize, z: &[f64], d: DistanceMetric, best: &mut f64) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    *best = best.min(d.distance(z, self.syn.get(i)));
                }
            }
            Node::Split { axis, value, left, right } => {
                let gap = z[axis] - value;
                let (near, far) = if gap < 0.0 { (left, right) } else { (right, left) };
                self.search(near, z, d, best);
                if gap.abs() <= *best {
                    self.search(far, z, d, best);
                }
            }
        }
    }
}

/// Nearest-neighbour distance for many samples, in input order.
pub fn nn_distance_batch(samples: &[Vec<f64>], syn: &SyntheticDataset, d: DistanceMetric) -> Result<Vec<QueryOutput>> {
    let tree = KdTree::build(syn);
    samples
        .par_iter()
        .map(|z| tree.nearest(z, d).and_then(QueryOutput::scalar))
        .collect()
}

/// Score with the number of in-ball distances that hit the floor.
fn ball_score(z: &[f64], syn: &SyntheticDataset, d: DistanceMetric, radius: f64) -> (f64, usize) {
    let mut sum = 0.0;
    let mut floored = 0;
    for g in syn.iter() {
        let dist = d.distance(z, g);
        if dist <= radius {
            if dist < DISTANCE_FLOOR {
                floored += 1;
            }
            sum += dist.max(DISTANCE_FLOOR).ln();
        }
    }
    (-sum / syn.len() as f64, floored)
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("epsilon_ball", format!("{radius} is not a positive radius")));
    }
    Ok(())
}

/// `−(1/n) Σ_i 𝟙(d(g_i, z) ≤ ε)·ln d(g_i, z)`, distances floored at
/// [`DISTANCE_FLOOR`].
pub fn mc_epsilon_ball_query(z: &[f64], syn: &SyntheticDataset, d: DistanceMetric, radius: f64) -> Result<QueryOutput> {
    check_radius(radius)?;
    syn.check(z)?;
    QueryOutput::scalar(ball_score(z, syn, d, radius).0)
}

/// ε-ball scores for many samples, with the total count of floored distances.
pub fn epsilon_ball_batch(
    samples: &[Vec<f64>],
    syn: &SyntheticDataset,
    d: DistanceMetric,
    radius: f64,
) -> Result<(Vec<QueryOutput>, usize)> {
    check_radius(radius)?;
    let scored: Vec<(f64, usize)> = samples
        .par_iter()
        .map(|z| syn.check(z).map(|_| ball_score(z, syn, d, radius)))
        .collect::<Result<_>>()?;
    let floored = scored.iter().map(|s| s.1).sum();
    let outputs = scored.into_iter().map(|(v, _)| QueryOutput::scalar(v)).collect::<Result<_>>()?;
    Ok((outputs, floored))
}

/// Concatenates query outputs of one sample into a single vector.
pub fn combine_queries(parts: &[QueryOutput]) -> Result<QueryOutput> {
    if parts.is_empty() {
        return Err(Error::Empty("query parts"));
    }
    QueryOutput::new(parts.iter().flat_map(|p| p.values().iter().copied()).collect())
}

/// Largest coordinate, as a 1-D output.
pub fn max_over_columns(multi: &QueryOutput) -> QueryOutput {
    let m = multi.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    QueryOutput::scalar(m).expect("maximum of finite values is finite")
}
