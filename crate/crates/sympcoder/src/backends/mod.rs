//! Model access: chat-completion and embedding contracts, an HTTP client
//! for OpenAI-compatible services, deterministic offline backends for
//! testing, and content-addressed caching.
//!
//! Remote sampling is nondeterministic; reproducibility comes from the
//! completion cache, which keys every raw response by a stable fingerprint
//! of the prompt and inference parameters.

mod cache;
mod embed;
mod http;
mod limit;
mod mock;
mod oracle;

pub use cache::DiskCache;
pub use embed::{Embedder, EmbeddingClient, EmbeddingVector, OfflineEmbedder, RemoteEmbedder};
pub use http::{HttpChatBackend, HttpConfig, RetryPolicy};
pub use limit::TokenBucket;
pub use mock::MockChatBackend;
pub use oracle::{oracle_complete, NoiseProfile, OracleBackend};

use crate::prompting::Prompt;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {last}")]
    Transport { attempts: u32, last: String },

    #[error("authentication rejected: {0}")]
    Credential(String),

    #[error("invalid inference parameter: {0}")]
    InvalidParams(String),

    #[error("empty input text")]
    EmptyText,

    #[error("cache io: {0}")]
    Cache(#[from] std::io::Error),

    #[error("malformed endpoint response: {0}")]
    BadResponse(String),

    #[error("noise profile out of range: {0}")]
    NoiseRange(String),
}

/// Sampling parameters sent with every completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceParams {
    pub model: String,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_max_new_tokens() -> u32 {
    256
}

fn default_temperature() -> f64 {
    0.4
}

impl InferenceParams {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            max_new_tokens: default_max_new_tokens(),
            temperature: default_temperature(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_new_tokens < 1 {
            return Err(BackendError::InvalidParams(
                "max_new_tokens must be at least 1".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidParams(format!(
                "temperature {} outside [0.0, 2.0]",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Stable content hash of (prompt text, inference parameters), used as the
/// cache key for completions.
pub fn prompt_fingerprint(prompt_text: &str, params: &InferenceParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(params.model.as_bytes());
    hasher.update([0]);
    hasher.update(params.max_new_tokens.to_le_bytes());
    hasher.update(params.temperature.to_le_bytes());
    hasher.update([0]);
    hasher.update(prompt_text.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A completion as returned by a concrete backend, before caching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionText {
    pub text: String,
    pub truncated: bool,
    /// Raw response body, preserved bit-exact for audit when the backend
    /// is remote.
    pub raw_body: Option<String>,
}

/// A completion with provenance, as consumed by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    pub model: String,
    pub prompt_fingerprint: String,
    pub retrieved_from_cache: bool,
    pub truncated: bool,
}

/// A chat-completion provider. Implementations handle their own transport
/// concerns (retries, rate limiting); caching lives in [`CompletionClient`].
pub trait ChatBackend: Send + Sync {
    fn complete_text(
        &self,
        prompt: &Prompt,
        params: &InferenceParams,
    ) -> Result<CompletionText, BackendError>;

    fn name(&self) -> &str;

    /// Cheap reachability check for fail-fast startup. Offline backends
    /// are always reachable.
    fn probe(&self) -> Result<(), BackendError> {
        Ok(())
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete_text(
        &self,
        prompt: &Prompt,
        params: &InferenceParams,
    ) -> Result<CompletionText, BackendError> {
        (**self).complete_text(prompt, params)
    }

    fn name(&self) -> &str {
        (**self).name()
    }

    fn probe(&self) -> Result<(), BackendError> {
        (**self).probe()
    }
}

/// Caching front end over any [`ChatBackend`]. Results are persisted under
/// the prompt fingerprint before they are returned, so an interrupted run
/// resumes from cache.
pub struct CompletionClient {
    backend: Box<dyn ChatBackend>,
    cache: Option<DiskCache<CompletionText>>,
    cache_hits: std::sync::atomic::AtomicUsize,
    cache_misses: std::sync::atomic::AtomicUsize,
}

impl CompletionClient {
    pub fn new(backend: Box<dyn ChatBackend>, cache: Option<DiskCache<CompletionText>>) -> Self {
        Self {
            backend,
            cache,
            cache_hits: std::sync::atomic::AtomicUsize::new(0),
            cache_misses: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    /// Completions served from cache during this session.
    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(std::sync::atomic::Ordering::SeqCst)
    }

    /// Completions that reached the backend during this session.
    pub fn cache_misses(&self) -> usize {
        self.cache_misses.load(std::sync::atomic::Ordering::SeqCst)
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn probe(&self) -> Result<(), BackendError> {
        self.backend.probe()
    }

    pub fn complete(
        &self,
        prompt: &Prompt,
        params: &InferenceParams,
    ) -> Result<RawCompletion, BackendError> {
        params.validate()?;
        let fingerprint = prompt_fingerprint(&prompt.text, params);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&fingerprint)? {
                self.cache_hits
                    .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                return Ok(RawCompletion {
                    text: hit.text,
                    model: params.model.clone(),
                    prompt_fingerprint: fingerprint,
                    retrieved_from_cache: true,
                    truncated: hit.truncated,
                });
            }
        }
        let completion = self.backend.complete_text(prompt, params)?;
        self.cache_misses
            .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        if let Some(cache) = &self.cache {
            cache.put(&fingerprint, &completion)?;
        }
        Ok(RawCompletion {
            text: completion.text,
            model: params.model.clone(),
            prompt_fingerprint: fingerprint,
            retrieved_from_cache: false,
            truncated: completion.truncated,
        })
    }

    /// Fetch a previously cached completion by fingerprint.
    pub fn cached(&self, fingerprint: &str) -> Result<Option<CompletionText>, BackendError> {
        match &self.cache {
            Some(cache) => Ok(cache.get(fingerprint)?),
            None => Ok(None),
        }
    }
}
