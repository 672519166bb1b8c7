use std::time::Duration;

use async_trait::async_trait;
use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector, ProviderFingerprint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpEmbedderConfig {
    /// Base URL; requests go to `{base_url}/embeddings`.
    pub base_url: String,
    pub model: String,
    pub dim: usize,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for HttpEmbedderConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            model: String::new(),
            dim: 384,
            api_key_env: "EMBED_API_KEY".into(),
            batch_size: 32,
            max_in_flight: 4,
            timeout_secs: 30,
        }
    }
}

/// Client for `POST {"input": [...]}` → `{"data": [{"embedding": [...]}]}`.
pub struct HttpEmbedder {
    client: reqwest::Client,
    endpoint: String,
    config: HttpEmbedderConfig,
    api_key: Option<String>,
}

impl std::fmt::Debug for HttpEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpEmbedder")
            .field("endpoint", &self.endpoint)
            .field("model", &self.config.model)
            .field("dim", &self.config.dim)
            .finish_non_exhaustive()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a [String],
    #[serde(skip_serializing_if = "str::is_empty")]
    model: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    /// Builds the client, reading the API key from the configured variable.
    pub fn new(config: HttpEmbedderConfig) -> Result<Self, EmbedError> {
        if config.base_url.trim().is_empty() {
            return Err(EmbedError::Config("embedding base_url is empty".into()));
        }
        if config.dim == 0 || config.batch_size == 0 || config.max_in_flight == 0 {
            return Err(EmbedError::Config("dim, batch_size and max_in_flight must be positive".into()));
        }
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EmbedError::Config(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let endpoint = format!("{}/embeddings", config.base_url.trim_end_matches('/'));
        Ok(Self { client, endpoint, config, api_key })
    }

    async fn call(&self, batch_index: usize, batch: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let remote = |message: String, retryable: bool| EmbedError::Remote {
            provider: "http".into(),
            batch_index,
            message,
            retryable,
        };

        let mut req = self.client.post(&self.endpoint).json(&EmbedRequest { input: batch, model: &self.config.model });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| {
            let kind = if e.is_timeout() { "timeout" } else { "transport error" };
            remote(kind.into(), true)
        })?;
        let status = resp.status();
        if !status.is_success() {
            let retryable = status.is_server_error() || status.as_u16() == 429;
            return Err(remote(format!("HTTP {}", status.as_u16()), retryable));
        }
        let body: EmbedResponse = resp.json().await.map_err(|_| remote("malformed response body".into(), true))?;
        if body.data.len() != batch.len() {
            return Err(EmbedError::CountMismatch {
                provider: "http".into(),
                expected: batch.len(),
                got: body.data.len(),
            });
        }
        body.data.into_iter().map(|d| EmbeddingVector::new(d.embedding)).collect()
    }
}

#[async_trait]
impl EmbeddingProvider for HttpEmbedder {
    fn fingerprint(&self) -> ProviderFingerprint {
        ProviderFingerprint { name: "http".into(), model: self.config.model.clone(), dim: self.config.dim }
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let calls: Vec<_> =
            texts.chunks(self.config.batch_size).enumerate().map(|(i, batch)| self.call(i, batch)).collect();
        let batches: Vec<Vec<EmbeddingVector>> =
            stream::iter(calls).buffered(self.config.max_in_flight).try_collect().await?;
        Ok(batches.into_iter().flatten().collect())
    }
}
