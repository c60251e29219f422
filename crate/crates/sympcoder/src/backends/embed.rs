//! Embedding contracts: a deterministic offline embedder and a remote one.

use super::http::RemoteEmbeddingBackend;
use super::{BackendError, DiskCache, HttpConfig};
use crate::distill::normalize_term;
use serde::{Deserialize, Serialize};

/// A fixed-length embedding with its producer's identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source: String,
}

pub trait Embedder: Send + Sync {
    fn embed_uncached(&self, text: &str) -> Result<Vec<f64>, BackendError>;
    fn id(&self) -> &str;
}

/// Character-trigram hashed bag-of-features of fixed dimension 256,
/// L2-normalized. Deterministic across processes: the bucket hash is a
/// fixed FNV-1a, not the process-seeded std hasher.
pub struct OfflineEmbedder {
    dimension: usize,
}

pub const OFFLINE_EMBEDDER_DIM: usize = 256;

impl Default for OfflineEmbedder {
    fn default() -> Self {
        Self {
            dimension: OFFLINE_EMBEDDER_DIM,
        }
    }
}

impl OfflineEmbedder {
    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Embedder for OfflineEmbedder {
    fn embed_uncached(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let normalized = normalize_term(text);
        let padded: Vec<char> = std::iter::once(' ')
            .chain(normalized.chars())
            .chain(std::iter::once(' '))
            .collect();
        let mut counts = vec![0.0f64; self.dimension];
        let mut any = false;
        for window in padded.windows(3) {
            let gram: String = window.iter().collect();
            let bucket = (fnv1a64(gram.as_bytes()) % self.dimension as u64) as usize;
            counts[bucket] += 1.0;
            any = true;
        }
        if !any {
            // nothing survived normalization; a constant unit feature keeps
            // downstream cosine defined
            counts[0] = 1.0;
        }
        let norm = counts.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut counts {
            *v /= norm;
        }
        Ok(counts)
    }

    fn id(&self) -> &str {
        "offline-trigram-256"
    }
}

/// Embedder backed by an OpenAI-compatible `/v1/embeddings` endpoint.
pub struct RemoteEmbedder {
    backend: RemoteEmbeddingBackend,
    id: String,
}

impl RemoteEmbedder {
    pub fn new(config: HttpConfig, model: impl Into<String>) -> Result<Self, BackendError> {
        let model = model.into();
        let id = format!("remote:{model}");
        Ok(Self {
            backend: RemoteEmbeddingBackend::new(config, model)?,
            id,
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn embed_uncached(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        self.backend.fetch(text)
    }

    fn id(&self) -> &str {
        &self.id
    }
}

/// Caching front end over any [`Embedder`]: deterministic per
/// (text, embedder) within a session.
pub struct EmbeddingClient {
    embedder: Box<dyn Embedder>,
    cache: Option<DiskCache<Vec<f64>>>,
}

impl EmbeddingClient {
    pub fn new(embedder: Box<dyn Embedder>, cache: Option<DiskCache<Vec<f64>>>) -> Self {
        Self { embedder, cache }
    }

    pub fn offline() -> Self {
        Self::new(Box::new(OfflineEmbedder::default()), None)
    }

    pub fn id(&self) -> &str {
        self.embedder.id()
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        if text.is_empty() {
            return Err(BackendError::EmptyText);
        }
        let key = {
            use sha2::{Digest, Sha256};
            let mut hasher = Sha256::new();
            hasher.update(self.embedder.id().as_bytes());
            hasher.update([0]);
            hasher.update(text.as_bytes());
            hasher
                .finalize()
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect::<String>()
        };
        if let Some(cache) = &self.cache {
            if let Some(values) = cache.get(&key)? {
                return Ok(EmbeddingVector {
                    values,
                    source: self.embedder.id().to_string(),
                });
            }
        }
        let values = self.embedder.embed_uncached(text)?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &values)?;
        }
        Ok(EmbeddingVector {
            values,
            source: self.embedder.id().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cosine_similarity;

    #[test]
    fn deterministic_and_fixed_length() {
        let embedder = OfflineEmbedder::default();
        let a = embedder.embed_uncached("fever").unwrap();
        let b = embedder.embed_uncached("fever").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), OFFLINE_EMBEDDER_DIM);
        let c = embedder.embed_uncached("a completely different phrase").unwrap();
        assert_eq!(c.len(), OFFLINE_EMBEDDER_DIM);
    }

    #[test]
    fn identical_text_has_unit_cosine() {
        let client = EmbeddingClient::offline();
        let a = client.embed("fever").unwrap();
        let b = client.embed("fever").unwrap();
        let cos = cosine_similarity(&a.values, &b.values).unwrap();
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similar_strings_score_higher_than_dissimilar() {
        let client = EmbeddingClient::offline();
        let fever = client.embed("fever").unwrap();
        let fevers = client.embed("fevers").unwrap();
        let unrelated = client.embed("wobbly legs").unwrap();
        let close = cosine_similarity(&fever.values, &fevers.values).unwrap();
        let far = cosine_similarity(&fever.values, &unrelated.values).unwrap();
        assert!(close > far, "close {close} <= far {far}");
    }

    #[test]
    fn empty_text_rejected() {
        let client = EmbeddingClient::offline();
        assert!(matches!(
            client.embed("").unwrap_err(),
            BackendError::EmptyText
        ));
    }
}
