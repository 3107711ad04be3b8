use super::{FrequencyVector, ReconstructError};
use crate::perturb::{ConditionNumber, GammaDiagonal, MaterializedMatrix, PerturbError};
use crate::schema::{Dataset, Record, Schema};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const MASS_TOL: f64 = 1e-9;

/// Mixed-radix index over an attribute subset, ordered like the schema.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetIndexer {
    attributes: Vec<usize>,
    cards: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl SubsetIndexer {
    pub fn new(schema: &Schema, attributes: &[usize]) -> Result<Self, ReconstructError> {
        if attributes.is_empty() {
            return Err(ReconstructError::Subset("subset is empty".into()));
        }
        if attributes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ReconstructError::Subset(format!("indices {attributes:?} are not strictly increasing")));
        }
        if let Some(&bad) = attributes.iter().find(|&&a| a >= schema.len()) {
            return Err(ReconstructError::Subset(format!("attribute {bad} outside schema of {} attributes", schema.len())));
        }
        let cards: Vec<usize> = attributes.iter().map(|&a| schema.attribute(a).cardinality()).collect();
        let mut strides = Vec::with_capacity(cards.len());
        let mut size = 1usize;
        for c in &cards {
            strides.push(size);
            size *= c;
        }
        Ok(SubsetIndexer { attributes: attributes.to_vec(), cards, strides, size })
    }

    pub fn attributes(&self) -> &[usize] {
        &self.attributes
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    /// `n_Cs`, the number of cells.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn index(&self, record: &Record) -> usize {
        self.attributes.iter().zip(&self.strides).map(|(&a, s)| record.values()[a] * s).sum()
    }

    /// Cell index of the given category per subset attribute.
    pub fn index_of(&self, categories: &[usize]) -> usize {
        categories.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    /// Category per subset attribute for a cell index.
    pub fn categories(&self, mut index: usize) -> Vec<usize> {
        self.cards
            .iter()
            .map(|&c| {
                let v = index % c;
                index /= c;
                v
            })
            .collect()
    }
}

/// Histogram of the records over one attribute subset.
pub fn count_marginal(dataset: &Dataset, indexer: &SubsetIndexer) -> FrequencyVector {
    count_marginals(dataset, std::slice::from_ref(indexer)).pop().expect("one subset")
}

/// Histograms over several subsets in a single pass over the data.
pub fn count_marginals(dataset: &Dataset, indexers: &[SubsetIndexer]) -> Vec<FrequencyVector> {
    let empty = || indexers.iter().map(|ix| vec![0.0; ix.size()]).collect::<Vec<_>>();
    let counts = dataset
        .records()
        .par_chunks(4096)
        .fold(empty, |mut acc, chunk| {
            for r in chunk {
                for (ix, cells) in indexers.iter().zip(acc.iter_mut()) {
                    cells[ix.index(r)] += 1.0;
                }
            }
            acc
        })
        .reduce(empty, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                for (p, q) in x.iter_mut().zip(y) {
                    *p += q;
                }
            }
            a
        });
    counts
        .into_iter()
        .zip(indexers)
        .map(|(c, ix)| FrequencyVector::new(c, Some(ix.attributes().to_vec())))
        .collect()
}

/// Sums a full-domain vector onto a subset.
pub fn marginalize(full: &FrequencyVector, schema: &Schema, indexer: &SubsetIndexer) -> Result<FrequencyVector, ReconstructError> {
    if full.len() != schema.domain_size() {
        return Err(ReconstructError::Dimension { expected: schema.domain_size(), got: full.len() });
    }
    let mut out = vec![0.0; indexer.size()];
    for (u, c) in full.counts().iter().enumerate() {
        let r = schema.decode(u).expect("index within domain");
        out[indexer.index(&r)] += c;
    }
    Ok(FrequencyVector::new(out, Some(indexer.attributes().to_vec())))
}

/// Marginal of a gamma-diagonal matrix on an attribute subset:
/// `(gamma - 1) x I + (n_C / n_Cs) x J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetMarginal {
    indexer: SubsetIndexer,
    domain_size: usize,
    gamma: f64,
    x: f64,
}

impl SubsetMarginal {
    pub fn new(schema: &Schema, attributes: &[usize], spec: &GammaDiagonal) -> Result<Self, ReconstructError> {
        if spec.domain_size() != schema.domain_size() {
            return Err(ReconstructError::Dimension { expected: schema.domain_size(), got: spec.domain_size() });
        }
        Ok(SubsetMarginal {
            indexer: SubsetIndexer::new(schema, attributes)?,
            domain_size: schema.domain_size(),
            gamma: spec.gamma(),
            x: spec.x(),
        })
    }

    pub fn indexer(&self) -> &SubsetIndexer {
        &self.indexer
    }

    pub fn size(&self) -> usize {
        self.indexer.size()
    }

    fn ratio(&self) -> f64 {
        (self.domain_size / self.indexer.size()) as f64
    }

    pub fn diagonal(&self) -> f64 {
        self.gamma * self.x + (self.ratio() - 1.0) * self.x
    }

    pub fn off_diagonal(&self) -> f64 {
        self.ratio() * self.x
    }

    pub fn matrix(&self) -> Result<MaterializedMatrix, PerturbError> {
        let n = self.size();
        if n > 4096 {
            return Err(PerturbError::TooLarge { rows: n, cols: n });
        }
        let (d, o) = (self.diagonal(), self.off_diagonal());
        Ok(MaterializedMatrix::from_fn(n, n, |v, u| if u == v { d } else { o }))
    }

    /// Expected perturbed supports for true supports `s`: `(gamma - 1) x s + (n_C / n_Cs) x sum(s)`.
    pub fn apply(&self, supports: &[f64]) -> Vec<f64> {
        let total: f64 = supports.iter().sum();
        let shift = self.off_diagonal() * total;
        supports.iter().map(|s| (self.gamma - 1.0) * self.x * s + shift).collect()
    }

    /// `s_U = (s_V - (n_C / n_Cs) x) / ((gamma - 1) x)` for relative supports summing to one.
    pub fn reconstruct(&self, perturbed: &[f64]) -> Result<Vec<f64>, ReconstructError> {
        if perturbed.len() != self.size() {
            return Err(ReconstructError::Dimension { expected: self.size(), got: perturbed.len() });
        }
        let total: f64 = perturbed.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(ReconstructError::Mass { total });
        }
        let shift = self.off_diagonal();
        let scale = (self.gamma - 1.0) * self.x;
        Ok(perturbed.iter().map(|s| (s - shift) / scale).collect())
    }
}

impl ConditionNumber for SubsetMarginal {
    /// `(gamma + n_C - 1) / (gamma - 1)`, the same for every subset.
    fn condition_number(&self) -> f64 {
        (self.gamma + self.domain_size as f64 - 1.0) / (self.gamma - 1.0)
    }
}
