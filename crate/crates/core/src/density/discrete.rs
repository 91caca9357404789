use std::collections::{BTreeMap, HashSet};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{common_dim, QueryOutput};

pub const DEFAULT_BINS: usize = 100;

/// Equal-width bins per dimension over a fitted range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    bins: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BinningScheme {
    pub fn new(bins: Vec<usize>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if bins.is_empty() || bins.len() != lo.len() || bins.len() != hi.len() {
            return Err(Error::invalid("scheme", "bins, lo and hi must share one nonzero length"));
        }
        if bins.iter().any(|&b| b < 2) {
            return Err(Error::invalid("bins", "need at least 2 bins per dimension"));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::invalid("scheme", format!("range [{l}, {h}] is empty")));
            }
        }
        if bins.iter().try_fold(1u64, |acc, &b| acc.checked_mul(b as u64)).is_none() {
            return Err(Error::invalid("bins", "total cell count overflows"));
        }
        Ok(Self { bins, lo, hi })
    }

    /// Fits per-dimension ranges to the data (min to max). A dimension with a
    /// single repeated value gets the range `[v − ½, v + ½]`.
    pub fn fit<'a>(
        outputs: impl IntoIterator<Item = &'a QueryOutput> + Clone,
        bins_per_dim: usize,
    ) -> Result<Self> {
        let dim = common_dim(outputs.clone())?.ok_or(Error::Empty("binning data"))?;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for q in outputs {
            for (k, &v) in q.values().iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        for k in 0..dim {
            if lo[k] == hi[k] {
                lo[k] -= 0.5;
                hi[k] += 0.5;
            }
        }
        Self::new(vec![bins_per_dim; dim], lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn total_cells(&self) -> u64 {
        self.bins.iter().map(|&b| b as u64).product()
    }

    /// Per-axis bin coordinates. Values outside the range land in the
    /// boundary bins.
    pub fn coords(&self, q: &QueryOutput) -> Result<Vec<usize>> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.dim(),
            });
        }
        Ok(q.values()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let width = (self.hi[k] - self.lo[k]) / self.bins[k] as f64;
                let idx = ((v - self.lo[k]) / width).floor();
                if idx < 0.0 {
                    0
                } else {
                    (idx as usize).min(self.bins[k] - 1)
                }
            })
            .collect())
    }

    /// Row-major flattening of [`BinningScheme::coords`].
    pub fn cell_index(&self, q: &QueryOutput) -> Result<u64> {
        let coords = self.coords(q)?;
        Ok(coords
            .iter()
            .zip(&self.bins)
            .fold(0u64, |acc, (&c, &b)| acc * b as u64 + c as u64))
    }

    /// Merges adjacent bin pairs along every axis (`bins / 2`, rounded up).
    pub fn coarsen(&self) -> Option<Self> {
        if self.bins.iter().any(|&b| b < 4) {
            return None;
        }
        let bins = self.bins.iter().map(|&b| b.div_ceil(2)).collect::<Vec<_>>();
        // Keep the original edges: an odd count gets a widened last bin.
        let hi = self
            .bins
            .iter()
            .zip(&bins)
            .enumerate()
            .map(|(k, (&old, &new))| {
                let width = (self.hi[k] - self.lo[k]) / old as f64;
                self.lo[k] + width * (2 * new) as f64
            })
            .collect();
        Self::new(bins, self.lo.clone(), hi).ok()
    }
}

/// Maps each output to the cell containing it.
pub fn discretize(outputs: &[QueryOutput], scheme: &BinningScheme) -> Result<Vec<Vec<usize>>> {
    outputs.iter().map(|q| scheme.coords(q)).collect()
}

/// A histogram cell: either a bin of a scheme, or an exact value for
/// natively discrete outputs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Bin(u64),
    Exact(Vec<OrderedFloat<f64>>),
}

impl Cell {
    fn exact(q: &QueryOutput) -> Self {
        // -0.0 and 0.0 are one outcome.
        Cell::Exact(q.values().iter().map(|&v| OrderedFloat(v + 0.0)).collect())
    }
}

pub(crate) fn cell_of(scheme: Option<&BinningScheme>, q: &QueryOutput) -> Result<Cell> {
    match scheme {
        Some(s) => s.cell_index(q).map(Cell::Bin),
        None => Ok(Cell::exact(q)),
    }
}

/// Number of distinct exact values among `outputs`.
pub fn distinct_count<'a>(outputs: impl IntoIterator<Item = &'a QueryOutput>) -> usize {
    outputs.into_iter().map(Cell::exact).collect::<HashSet<_>>().len()
}

/// Empirical cell frequencies `k_j / n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDensity {
    scheme: Option<BinningScheme>,
    dim: usize,
    n: u64,
    #[serde(with = "cell_counts")]
    counts: BTreeMap<Cell, u64>,
}

mod cell_counts {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        cell: Cell,
        count: u64,
    }

    pub fn serialize<S: Serializer>(counts: &BTreeMap<Cell, u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(counts.iter().map(|(cell, &count)| Entry {
            cell: cell.clone(),
            count,
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<Cell, u64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| (e.cell, e.count)).collect())
    }
}

/// Counts outputs per cell. Without a scheme every distinct value is a cell.
pub fn fit_discrete(outputs: &[QueryOutput], scheme: Option<&BinningScheme>) -> Result<DiscreteDensity> {
    let dim = common_dim(outputs)?.ok_or(Error::Empty("density sample"))?;
    let mut counts = BTreeMap::new();
    for q in outputs {
        *counts.entry(cell_of(scheme, q)?).or_insert(0u64) += 1;
    }
    Ok(DiscreteDensity {
        scheme: scheme.cloned(),
        dim,
        n: outputs.len() as u64,
        counts,
    })
}

impl DiscreteDensity {
    pub fn scheme(&self) -> Option<&BinningScheme> {
        self.scheme.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn cell_of(&self, q: &QueryOutput) -> Result<Cell> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: q.dim(),
            });
        }
        cell_of(self.scheme.as_ref(), q)
    }

    pub fn count(&self, cell: &Cell) -> u64 {
        self.counts.get(cell).copied().unwrap_or(0)
    }

    pub fn mass(&self, cell: &Cell) -> f64 {
        self.count(cell) as f64 / self.n as f64
    }

    pub fn mass_at(&self, q: &QueryOutput) -> Result<f64> {
        Ok(self.mass(&self.cell_of(q)?))
    }

    /// Observed cells with their counts, in cell order.
    pub fn cells(&self) -> impl Iterator<Item = (&Cell, u64)> {
        self.counts.iter().map(|(c, &k)| (c, k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{sample_toy, ToySpec};

    fn q(v: &[f64]) -> QueryOutput {
        QueryOutput::new(v.to_vec()).unwrap()
    }

    #[test]
    fn discretize_examples() {
        let s = BinningScheme::new(vec![100], vec![0.0], vec![1.0]).unwrap();
        assert_eq!(s.coords(&q(&[0.005])).unwrap(), vec![0]);
        assert_eq!(s.coords(&q(&[1.7])).unwrap(), vec![99]);
        assert_eq!(s.coords(&q(&[-3.0])).unwrap(), vec![0]);
        assert_eq!(s.coords(&q(&[1.0])).unwrap(), vec![99]);
        let s2 = BinningScheme::new(vec![100, 100], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(discretize(&[q(&[0.005, 0.995])], &s2).unwrap(), vec![vec![0, 99]]);
        assert_eq!(s2.cell_index(&q(&[0.005, 0.995])).unwrap(), 99);
        assert!(matches!(s2.coords(&q(&[0.5])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn scheme_validation() {
        assert!(BinningScheme::new(vec![1], vec![0.0], vec![1.0]).is_err());
        assert!(BinningScheme::new(vec![10], vec![1.0], vec![1.0]).is_err());
        let s = BinningScheme::fit(&[q(&[2.0]), q(&[2.0])], 10).unwrap();
        assert_eq!(s.coords(&q(&[2.0])).unwrap(), vec![5]);
        assert_eq!(s.total_cells(), 10);
    }

    #[test]
    fn point_mass_and_counting() {
        let d = fit_discrete(&[q(&[3.0]), q(&[3.0]), q(&[3.0])], None).unwrap();
        assert_eq!(d.mass_at(&q(&[3.0])).unwrap(), 1.0);
        assert_eq!(d.mass_at(&q(&[4.0])).unwrap(), 0.0);

        let mut outputs = vec![q(&[0.0]); 4];
        outputs.extend(vec![q(&[1.0]); 6]);
        let d = fit_discrete(&outputs, None).unwrap();
        assert_eq!(d.mass_at(&q(&[0.0])).unwrap(), 0.4);
        assert_eq!(d.mass_at(&q(&[1.0])).unwrap(), 0.6);
        let total: f64 = d.cells().map(|(c, _)| d.mass(c)).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(fit_discrete(&[], None).is_err());
    }

    #[test]
    fn categorical_frequencies_within_three_sigma() {
        let draws = sample_toy(&ToySpec::Categorical(vec![0.9, 0.1]), 1000, 17).unwrap();
        let d = fit_discrete(&draws, None).unwrap();
        assert!((d.mass_at(&q(&[0.0])).unwrap() - 0.9).abs() < 0.03);
        assert!((d.mass_at(&q(&[1.0])).unwrap() - 0.1).abs() < 0.03);
    }

    #[test]
    fn negative_zero_is_zero() {
        let d = fit_discrete(&[q(&[-0.0]), q(&[0.0])], None).unwrap();
        assert_eq!(d.mass_at(&q(&[0.0])).unwrap(), 1.0);
    }

    #[test]
    fn density_round_trips_through_json() {
        let s = BinningScheme::new(vec![4], vec![0.0], vec![1.0]).unwrap();
        let d = fit_discrete(&[q(&[0.1]), q(&[0.9]), q(&[0.95])], Some(&s)).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<DiscreteDensity>(&json).unwrap(), d);
    }

    #[test]
    fn coarsen_keeps_edges() {
        let s = BinningScheme::new(vec![5], vec![0.0], vec![1.0]).unwrap();
        assert!(s.coarsen().is_some());
        let s = BinningScheme::new(vec![8], vec![0.0], vec![1.0]).unwrap();
        let c = s.coarsen().unwrap();
        assert_eq!(c.bins(), &[4]);
        for v in [0.01, 0.2, 0.26, 0.51, 0.99] {
            assert_eq!(c.coords(&q(&[v])).unwrap()[0], s.coords(&q(&[v])).unwrap()[0] / 2);
        }
    }
}
