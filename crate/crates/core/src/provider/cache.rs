//! Persistent embedding cache.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! "EMB1" | version: u16 | dimension: u32 | count: u64
//! count × ( text_len: u32 | text: [u8; text_len] | vector: [f32; dimension] )
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::RwLock;

use super::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::text::normalize;

pub const CACHE_MAGIC: &[u8; 4] = b"EMB1";
pub const CACHE_VERSION: u16 = 1;
pub(crate) const HEADER_LEN: usize = 4 + 2 + 4 + 8;

/// Embeddings keyed by normalized text, stored at 32-bit precision.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    dimension: usize,
    entries: BTreeMap<String, Embedding>,
}

impl EmbeddingCache {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&Embedding> {
        self.entries.get(&normalize(text))
    }

    pub fn contains(&self, text: &str) -> bool {
        self.get(text).is_some()
    }

    /// Stores the 32-bit rounding of `embedding` and returns it.
    pub fn insert(&mut self, text: &str, embedding: &Embedding) -> Result<Embedding> {
        if embedding.dim() != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                actual: embedding.dim(),
            });
        }
        let key = normalize(text);
        if key.is_empty() {
            return Err(Error::Provider("cannot cache an empty text".into()));
        }
        let stored = embedding.quantized()?;
        self.entries.insert(key, stored.clone());
        Ok(stored)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Size in bytes of the serialized form.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + self
                .entries
                .keys()
                .map(|k| 4 + k.len() + 4 * self.dimension)
                .sum::<usize>()
    }
}

pub fn write_cache(cache: &EmbeddingCache, path: &Path) -> Result<()> {
    if cache.is_empty() {
        return Err(Error::EmptyCache);
    }
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(CACHE_MAGIC).map_err(io)?;
    w.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(cache.dimension as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(cache.len() as u64).to_le_bytes()).map_err(io)?;
    for (text, emb) in cache.iter() {
        w.write_all(&(text.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(text.as_bytes()).map_err(io)?;
        for v in emb.to_f32() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_cache(path: &Path) -> Result<EmbeddingCache> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let corrupt = |what: &str| Error::Format(format!("{}: corrupt cache: {what}", path.display()));
    let mut read_exact = |buf: &mut [u8], what: &str| {
        r.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => corrupt(&format!("truncated {what}")),
            _ => Error::io(path, e),
        })
    };

    let mut magic = [0u8; 4];
    read_exact(&mut magic, "magic")?;
    if &magic != CACHE_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut b2 = [0u8; 2];
    read_exact(&mut b2, "version")?;
    let version = u16::from_le_bytes(b2);
    if version != CACHE_VERSION {
        return Err(corrupt(&format!("unsupported version {version}")));
    }
    let mut b4 = [0u8; 4];
    read_exact(&mut b4, "dimension")?;
    let dimension = u32::from_le_bytes(b4) as usize;
    if dimension == 0 {
        return Err(corrupt("zero dimension"));
    }
    let mut b8 = [0u8; 8];
    read_exact(&mut b8, "count")?;
    let count = u64::from_le_bytes(b8);

    let mut cache = EmbeddingCache::new(dimension);
    let mut vec_buf = vec![0u8; 4 * dimension];
    for _ in 0..count {
        read_exact(&mut b4, "text length")?;
        let mut text = vec![0u8; u32::from_le_bytes(b4) as usize];
        read_exact(&mut text, "text")?;
        let text = String::from_utf8(text).map_err(|_| corrupt("text is not UTF-8"))?;
        read_exact(&mut vec_buf, "vector")?;
        let values: Vec<f32> = vec_buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let emb = Embedding::from_f32(&values)
            .map_err(|e| corrupt(&format!("entry `{text}`: {e}")))?;
        if normalize(&text) != text {
            return Err(corrupt(&format!("key `{text}` is not normalized")));
        }
        if cache.entries.insert(text.clone(), emb).is_some() {
            return Err(corrupt(&format!("duplicate key `{text}`")));
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(cache)
}

/// Write-through cache in front of another provider.
///
/// Returned vectors are the cached (32-bit rounded) values, so a later
/// fixture reload yields exactly what callers saw.
pub struct CachingProvider<P> {
    inner: P,
    cache: RwLock<EmbeddingCache>,
}

impl<P: EmbeddingProvider> CachingProvider<P> {
    pub fn new(inner: P) -> Self {
        let dim = inner.dimension();
        Self {
            inner,
            cache: RwLock::new(EmbeddingCache::new(dim)),
        }
    }

    /// Starts from an existing cache, e.g. one loaded from disk.
    pub fn with_cache(inner: P, cache: EmbeddingCache) -> Result<Self> {
        if cache.dimension() != inner.dimension() {
            return Err(Error::Dimension {
                expected: inner.dimension(),
                actual: cache.dimension(),
            });
        }
        Ok(Self {
            inner,
            cache: RwLock::new(cache),
        })
    }

    pub fn snapshot(&self) -> EmbeddingCache {
        self.cache.read().expect("cache lock poisoned").clone()
    }

    pub fn into_cache(self) -> EmbeddingCache {
        self.cache.into_inner().expect("cache lock poisoned")
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachingProvider<P> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        let keys: Vec<String> = texts.iter().map(|t| normalize(t)).collect();
        let mut misses: Vec<String> = {
            let cache = self.cache.read().expect("cache lock poisoned");
            keys.iter().filter(|k| !cache.entries.contains_key(*k)).cloned().collect()
        };
        misses.sort();
        misses.dedup();
        if !misses.is_empty() {
            let fresh = self.inner.embed_batch(&misses)?;
            if fresh.len() != misses.len() {
                return Err(Error::Provider(format!(
                    "asked for {} embeddings, received {}",
                    misses.len(),
                    fresh.len()
                )));
            }
            let mut cache = self.cache.write().expect("cache lock poisoned");
            for (text, emb) in misses.iter().zip(&fresh) {
                // A concurrent caller may have inserted the same text; keep the first.
                if !cache.entries.contains_key(text) {
                    cache.insert(text, emb)?;
                }
            }
        }
        let cache = self.cache.read().expect("cache lock poisoned");
        keys.iter()
            .map(|k| {
                cache
                    .entries
                    .get(k)
                    .cloned()
                    .ok_or_else(|| Error::MissingEmbedding(k.clone()))
            })
            .collect()
    }
}
