//! Vector similarity, anisotropy estimation and quantile binning of
//! similarity distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense, finite, non-zero vector produced by a language encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidEmbedding("zero-dimensional vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbedding(format!(
                "non-finite entry at index {i}"
            )));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidEmbedding("zero vector".into()));
        }
        Ok(Self(values))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Values rounded to the 32-bit storage precision used by caches and the
    /// wire protocol.
    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&v| v as f32).collect()
    }

    /// This embedding after a round trip through 32-bit storage.
    pub fn quantized(&self) -> Result<Self> {
        Self::from_f32(&self.to_f32())
    }
}

/// Cosine similarity with 64-bit accumulation, clamped to [-1, 1].
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension {
            expected: u.dim(),
            actual: v.dim(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.0.iter().zip(&v.0) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    // Symmetric in (u, v): the product nu*nv commutes exactly.
    let c = dot / (nu * nv).sqrt();
    Ok(c.clamp(-1.0, 1.0))
}

/// `n_pairs` ordered index pairs `(i, j)`, `i != j`, drawn uniformly with
/// replacement. Pairs with `i == j` are rejected and redrawn.
pub fn sample_pairs(count_items: usize, n_pairs: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if count_items < 2 {
        return Err(Error::InsufficientItems {
            needed: 2,
            got: count_items,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let i = rng.random_range(0..count_items);
        let j = rng.random_range(0..count_items);
        if i != j {
            pairs.push((i, j));
        }
    }
    Ok(pairs)
}

/// Empirical cosine-similarity distribution of random caption pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDistribution {
    pub samples: Vec<f64>,
    pub pair_count: usize,
    pub seed: u64,
}

impl SimilarityDistribution {
    pub fn new(samples: Vec<f64>, seed: u64) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(Error::Format(format!(
                "similarity sample {s} outside [-1, 1]"
            )));
        }
        Ok(Self {
            pair_count: samples.len(),
            samples,
            seed,
        })
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.pair_count {
            return Err(Error::Format(format!(
                "distribution declares {} pairs but holds {} samples",
                self.pair_count,
                self.samples.len()
            )));
        }
        Self::new(self.samples.clone(), self.seed).map(|_| ())
    }
}

/// Mean cosine similarity over `n_pairs` random pairs, plus the distribution
/// it was computed from.
pub fn anisotropy(
    embeddings: &[Embedding],
    n_pairs: usize,
    seed: u64,
) -> Result<(f64, SimilarityDistribution)> {
    if embeddings.len() < 2 {
        return Err(Error::InsufficientItems {
            needed: 2,
            got: embeddings.len(),
        });
    }
    let dim = embeddings[0].dim();
    if let Some(e) = embeddings.iter().find(|e| e.dim() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: e.dim(),
        });
    }
    let samples = sample_pairs(embeddings.len(), n_pairs, seed)?
        .into_iter()
        .map(|(i, j)| cosine(&embeddings[i], &embeddings[j]))
        .collect::<Result<Vec<_>>>()?;
    let dist = SimilarityDistribution::new(samples, seed)?;
    Ok((dist.mean(), dist))
}

/// Linear-interpolation quantile ("type 7") of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// K+1 strictly increasing edges with fixed outer edges 0.0 and 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEdges")]
pub struct BinEdges {
    k: usize,
    edges: Vec<f64>,
}

#[derive(Deserialize)]
struct RawEdges {
    k: usize,
    edges: Vec<f64>,
}

impl TryFrom<RawEdges> for BinEdges {
    type Error = Error;

    fn try_from(raw: RawEdges) -> Result<Self> {
        if raw.edges.len() != raw.k + 1 {
            return Err(Error::Format(format!(
                "k = {} requires {} edges, found {}",
                raw.k,
                raw.k + 1,
                raw.edges.len()
            )));
        }
        BinEdges::new(raw.edges)
    }
}

impl BinEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 3 {
            return Err(Error::DegenerateDistribution(format!(
                "need at least 3 edges (k >= 2), got {}",
                edges.len()
            )));
        }
        if edges[0] != 0.0 || edges[edges.len() - 1] != 1.0 {
            return Err(Error::DegenerateDistribution(
                "outer edges must be exactly 0.0 and 1.0".into(),
            ));
        }
        if let Some(w) = edges.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::DegenerateDistribution(format!(
                "edges not strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self {
            k: edges.len() - 1,
            edges,
        })
    }

    /// Edges from interior values, adding the fixed outer edges.
    pub fn from_interior(interior: &[f64]) -> Result<Self> {
        let mut edges = Vec::with_capacity(interior.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(interior);
        edges.push(1.0);
        Self::new(edges)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Nominal `[low, high]` interval of a 1-based bin.
    pub fn interval(&self, bin: usize) -> (f64, f64) {
        (self.edges[bin - 1], self.edges[bin])
    }
}

/// Interior edges at the 1/k … (k-1)/k quantiles of the distribution.
pub fn bin_edges(distribution: &SimilarityDistribution, k: usize) -> Result<BinEdges> {
    if k < 2 {
        return Err(Error::DegenerateDistribution(format!("k must be >= 2, got {k}")));
    }
    if distribution.samples.len() < k {
        return Err(Error::InsufficientItems {
            needed: k,
            got: distribution.samples.len(),
        });
    }
    let mut sorted = distribution.samples.clone();
    sorted.sort_by(f64::total_cmp);
    let interior: Vec<f64> = (1..k)
        .map(|i| quantile_sorted(&sorted, i as f64 / k as f64))
        .collect();
    BinEdges::from_interior(&interior)
}

/// 1-based bin of a similarity: `edges[b-1] <= s < edges[b]`, with bin 1
/// extended below 0 and bin K closed at 1.
pub fn assign_bin(similarity: f64, edges: &BinEdges) -> usize {
    let k = edges.k();
    (1..k).find(|&b| similarity < edges.edges[b]).unwrap_or(k)
}
