//! Embedding acquisition behind one contract, with synthetic, fixture-file
//! and remote backends plus a write-through cache.

mod cache;
mod remote;
mod synthetic;

use std::path::PathBuf;

pub use cache::{read_cache, write_cache, CachingProvider, EmbeddingCache, CACHE_MAGIC, CACHE_VERSION};
pub use remote::{RemoteProvider, PROTOCOL_VERSION};
pub use synthetic::SyntheticProvider;

use crate::error::{Error, Result};
use crate::geometry::Embedding;

/// Source of text embeddings with a fixed dimension.
///
/// Implementations must be callable concurrently and must return exactly one
/// embedding per input text, in input order.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Stable description recorded in manifests (backend, encoder, seed).
    fn identity(&self) -> String;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>>;

    fn embed_one(&self, text: &str) -> Result<Embedding> {
        let mut v = self.embed_batch(&[text.to_owned()])?;
        v.pop()
            .ok_or_else(|| Error::Provider("provider returned no embedding".into()))
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        (**self).embed_batch(texts)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<P> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        (**self).embed_batch(texts)
    }
}

/// One request on the remote protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRequest {
    pub texts: Vec<String>,
    pub request_id: u64,
}

impl EmbeddingRequest {
    pub fn new(request_id: u64, texts: Vec<String>) -> Result<Self> {
        if texts.is_empty() || texts.iter().any(|t| t.is_empty()) {
            return Err(Error::Provider(format!(
                "request {request_id}: texts must be non-empty"
            )));
        }
        Ok(Self { texts, request_id })
    }
}

/// Serves embeddings from a cache file; a miss is an error.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    cache: EmbeddingCache,
    source: PathBuf,
}

impl FixtureProvider {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let source = path.into();
        let cache = read_cache(&source)?;
        Ok(Self { cache, source })
    }

    pub fn from_cache(cache: EmbeddingCache) -> Self {
        Self {
            cache,
            source: PathBuf::from("<memory>"),
        }
    }
}

impl EmbeddingProvider for FixtureProvider {
    fn dimension(&self) -> usize {
        self.cache.dimension()
    }

    fn identity(&self) -> String {
        let name = self
            .source
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        format!("fixture:{name}")
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        texts
            .iter()
            .map(|t| {
                self.cache
                    .get(t)
                    .cloned()
                    .ok_or_else(|| Error::MissingEmbedding(t.clone()))
            })
            .collect()
    }
}

/// Parsed `--provider` value.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderSpec {
    /// `synthetic:SEED[:DIM[:BIAS]]`
    Synthetic { seed: u64, dim: usize, bias: f64 },
    /// `fixture:PATH`
    Fixture(PathBuf),
    /// `remote:HOST:PORT` over TCP, or `remote:stdio` to launch the sidecar.
    Remote(String),
}

impl std::str::FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Provider(format!("invalid provider `{s}`: {msg}"));
        let (kind, rest) = s.split_once(':').ok_or_else(|| bad("missing `:`"))?;
        match kind {
            "synthetic" => {
                let mut parts = rest.split(':');
                let seed = parts
                    .next()
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(|| bad("seed must be an unsigned integer"))?;
                let dim = match parts.next() {
                    Some(p) => p.parse().map_err(|_| bad("dimension must be an integer"))?,
                    None => SyntheticProvider::DEFAULT_DIM,
                };
                let bias = match parts.next() {
                    Some(p) => p.parse().map_err(|_| bad("bias must be a number"))?,
                    None => 0.0,
                };
                if parts.next().is_some() {
                    return Err(bad("too many fields"));
                }
                if dim == 0 {
                    return Err(bad("dimension must be positive"));
                }
                Ok(ProviderSpec::Synthetic { seed, dim, bias })
            }
            "fixture" if !rest.is_empty() => Ok(ProviderSpec::Fixture(PathBuf::from(rest))),
            "remote" if !rest.is_empty() => Ok(ProviderSpec::Remote(rest.to_owned())),
            _ => Err(bad("expected synthetic:SEED, fixture:PATH or remote:ADDR")),
        }
    }
}

impl ProviderSpec {
    /// Opens the backend. `sidecar_command` is the launch command used for
    /// `remote:stdio`.
    pub fn open(&self, sidecar_command: &str) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderSpec::Synthetic { seed, dim, bias } => {
                Box::new(SyntheticProvider::with_bias(*seed, *dim, *bias)?)
            }
            ProviderSpec::Fixture(path) => Box::new(FixtureProvider::open(path.clone())?),
            ProviderSpec::Remote(addr) if addr == "stdio" => {
                Box::new(RemoteProvider::spawn(sidecar_command)?)
            }
            ProviderSpec::Remote(addr) => Box::new(RemoteProvider::connect(addr)?),
        })
    }
}
