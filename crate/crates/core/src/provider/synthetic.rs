use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::hashing::stable_hash64;
use crate::text::normalize;

/// Deterministic hash-seeded embeddings.
///
/// The vector for a text depends only on `(seed, normalize(text))`: a
/// standard-normal draw scaled by `1/sqrt(dim)`, plus `bias` times a unit
/// direction shared by every text of the same seed, then normalized. With
/// `bias = 0` the vectors are isotropic; in general the expected cosine
/// between two texts is close to `bias^2 / (1 + bias^2)`.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    seed: u64,
    dim: usize,
    bias: f64,
    shared: Vec<f64>,
}

impl SyntheticProvider {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(seed: u64, dim: usize) -> Result<Self> {
        Self::with_bias(seed, dim, 0.0)
    }

    pub fn with_bias(seed: u64, dim: usize, bias: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Provider("synthetic dimension must be positive".into()));
        }
        if !bias.is_finite() || bias < 0.0 {
            return Err(Error::Provider(format!("invalid synthetic bias {bias}")));
        }
        let shared = unit_gaussian(stable_hash64(&[b"shared-direction", &seed.to_le_bytes()]), dim);
        Ok(Self {
            seed,
            dim,
            bias,
            shared,
        })
    }

    fn vector(&self, text: &str) -> Result<Embedding> {
        let key = normalize(text);
        let h = stable_hash64(&[&self.seed.to_le_bytes(), key.as_bytes()]);
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let scale = (self.dim as f64).sqrt().recip();
        let mut v: Vec<f64> = (0..self.dim)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale + self.bias * self.shared[i]
            })
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Embedding::new(v)
    }
}

fn unit_gaussian(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

impl EmbeddingProvider for SyntheticProvider {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> String {
        format!("synthetic:seed={},dim={},bias={}", self.seed, self.dim, self.bias)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| self.vector(t)).collect()
    }
}
