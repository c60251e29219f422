//! Chat-completion client for OpenAI-compatible HTTP services.

use super::limit::TokenBucket;
use super::{BackendError, ChatBackend, CompletionText, InferenceParams};
use crate::prompting::Prompt;
use serde::Deserialize;
use serde_json::json;
use std::time::Duration;

/// Transient-failure handling: exponential backoff starting at
/// `initial_backoff`, doubling per attempt. Statuses other than 429 in the
/// 4xx range are not retried; 401/403 map to credential errors.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    /// Retry once more when the completion hit the token limit instead of
    /// handing the truncated text to the distiller.
    pub retry_on_truncation: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
            retry_on_truncation: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    /// Requests per second; `None` disables rate limiting.
    pub requests_per_sec: Option<f64>,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            retry: RetryPolicy::default(),
            requests_per_sec: None,
            timeout: Duration::from_secs(120),
        }
    }
}

pub struct HttpChatBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    limiter: Option<TokenBucket>,
}

impl HttpChatBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport {
                attempts: 0,
                last: e.to_string(),
            })?;
        let limiter = config
            .requests_per_sec
            .map(|rps| TokenBucket::new(rps.ceil().max(1.0) as u32, rps));
        Ok(Self {
            config,
            client,
            limiter,
        })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post_json(
        &self,
        url: &str,
        body: &serde_json::Value,
    ) -> Result<reqwest::blocking::Response, reqwest::Error> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut request = self.client.post(url).json(body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        request.send()
    }

    /// POST with the configured retry policy. Returns the final response
    /// body and status.
    fn post_with_retries(
        &self,
        url: &str,
        body: &serde_json::Value,
    ) -> Result<String, BackendError> {
        let mut last_error = String::new();
        let mut backoff = self.config.retry.initial_backoff;
        for attempt in 1..=self.config.retry.max_attempts {
            match self.post_json(url, body) {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        return response.text().map_err(|e| BackendError::Transport {
                            attempts: attempt,
                            last: e.to_string(),
                        });
                    }
                    if status == reqwest::StatusCode::UNAUTHORIZED
                        || status == reqwest::StatusCode::FORBIDDEN
                    {
                        return Err(BackendError::Credential(format!(
                            "{} from {}",
                            status, url
                        )));
                    }
                    let retryable = status == reqwest::StatusCode::TOO_MANY_REQUESTS
                        || status.is_server_error();
                    last_error = format!("status {status}");
                    if !retryable {
                        return Err(BackendError::Transport {
                            attempts: attempt,
                            last: last_error,
                        });
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
            if attempt < self.config.retry.max_attempts {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(BackendError::Transport {
            attempts: self.config.retry.max_attempts,
            last: last_error,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

impl ChatBackend for HttpChatBackend {
    fn complete_text(
        &self,
        prompt: &Prompt,
        params: &InferenceParams,
    ) -> Result<CompletionText, BackendError> {
        let url = self.endpoint("v1/chat/completions");
        let body = json!({
            "model": params.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "max_tokens": params.max_new_tokens,
            "temperature": params.temperature,
        });
        let mut truncation_retries = if self.config.retry.retry_on_truncation {
            1
        } else {
            0
        };
        loop {
            let raw_body = self.post_with_retries(&url, &body)?;
            let parsed: ChatResponse = serde_json::from_str(&raw_body)
                .map_err(|e| BackendError::BadResponse(e.to_string()))?;
            let choice = parsed
                .choices
                .into_iter()
                .next()
                .ok_or_else(|| BackendError::BadResponse("no choices in response".into()))?;
            let truncated = choice.finish_reason.as_deref() == Some("length");
            if truncated && truncation_retries > 0 {
                truncation_retries -= 1;
                continue;
            }
            return Ok(CompletionText {
                text: choice.message.content.unwrap_or_default(),
                truncated,
                raw_body: Some(raw_body),
            });
        }
    }

    fn name(&self) -> &str {
        "http"
    }

    fn probe(&self) -> Result<(), BackendError> {
        let url = self.endpoint("v1/models");
        let mut request = self.client.get(&url);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        match request.send() {
            // any HTTP answer means the endpoint is reachable
            Ok(_) => Ok(()),
            Err(e) => Err(BackendError::Transport {
                attempts: 1,
                last: e.to_string(),
            }),
        }
    }
}

/// Embedding client for the matching `/v1/embeddings` endpoint.
pub struct RemoteEmbeddingBackend {
    backend: HttpChatBackend,
    model: String,
}

impl RemoteEmbeddingBackend {
    pub fn new(config: HttpConfig, model: impl Into<String>) -> Result<Self, BackendError> {
        Ok(Self {
            backend: HttpChatBackend::new(config)?,
            model: model.into(),
        })
    }

    pub fn fetch(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let url = self.backend.endpoint("v1/embeddings");
        let body = json!({"model": self.model, "input": text});
        let raw = self.backend.post_with_retries(&url, &body)?;
        #[derive(Deserialize)]
        struct EmbeddingResponse {
            data: Vec<EmbeddingDatum>,
        }
        #[derive(Deserialize)]
        struct EmbeddingDatum {
            embedding: Vec<f64>,
        }
        let parsed: EmbeddingResponse =
            serde_json::from_str(&raw).map_err(|e| BackendError::BadResponse(e.to_string()))?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| BackendError::BadResponse("no embedding in response".into()))
    }
}
