use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::{ChatBackend, HttpChatBackend, LlmConfig, LlmError, PromptOptions, WireMessage};
use crate::embed::{campus_synonyms, EmbeddingProvider, HashedEmbedder, HttpEmbedder, HttpEmbedderConfig};
use crate::retriever::RetrieverConfig;
use crate::textprep::ChunkParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: String, source: Box<toml::de::Error> },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StorageConfig {
    /// Root for everything below unless overridden.
    pub data_dir: PathBuf,
    /// SQLite file; defaults to `<data_dir>/relational.db`.
    pub relational_db: Option<PathBuf>,
    /// Vector store directory; defaults to `<data_dir>/vectors`.
    pub vector_dir: Option<PathBuf>,
    /// Chat session logs; defaults to `<data_dir>/sessions`.
    pub session_dir: Option<PathBuf>,
}

impl Default for StorageConfig {
    fn default() -> Self {
        Self { data_dir: PathBuf::from("data/store"), relational_db: None, vector_dir: None, session_dir: None }
    }
}

impl StorageConfig {
    pub fn relational_db(&self) -> PathBuf {
        self.relational_db.clone().unwrap_or_else(|| self.data_dir.join("relational.db"))
    }

    pub fn vector_dir(&self) -> PathBuf {
        self.vector_dir.clone().unwrap_or_else(|| self.data_dir.join("vectors"))
    }

    pub fn session_dir(&self) -> PathBuf {
        self.session_dir.clone().unwrap_or_else(|| self.data_dir.join("sessions"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// Offline deterministic embedder.
    Hashed,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: EmbeddingKind,
    pub dim: usize,
    /// Hash seed of the offline embedder.
    pub seed: u64,
    /// Load the built-in campus synonym groups into the offline embedder.
    pub synonyms: bool,
    pub http: HttpEmbedderConfig,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { provider: EmbeddingKind::Hashed, dim: 256, seed: 0, synonyms: true, http: HttpEmbedderConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmKind {
    Http,
    /// Replies with the prompt's last message. For demos and tests.
    Echo,
}

/// `[llm]`: the backend kind plus the endpoint settings, in one flat table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LlmTable", into = "LlmTable")]
pub struct LlmSection {
    pub provider: LlmKind,
    pub http: LlmConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LlmTable {
    provider: LlmKind,
    base_url: String,
    model: String,
    api_key_env: String,
    temperature: f64,
    max_tokens: u32,
    timeout_secs: u64,
}

impl Default for LlmTable {
    fn default() -> Self {
        LlmSection::default().into()
    }
}

impl From<LlmTable> for LlmSection {
    fn from(t: LlmTable) -> Self {
        let http = LlmConfig {
            base_url: t.base_url,
            model: t.model,
            api_key_env: t.api_key_env,
            temperature: t.temperature,
            max_tokens: t.max_tokens,
            timeout_secs: t.timeout_secs,
        };
        Self { provider: t.provider, http }
    }
}

impl From<LlmSection> for LlmTable {
    fn from(s: LlmSection) -> Self {
        let h = s.http;
        Self {
            provider: s.provider,
            base_url: h.base_url,
            model: h.model,
            api_key_env: h.api_key_env,
            temperature: h.temperature,
            max_tokens: h.max_tokens,
            timeout_secs: h.timeout_secs,
        }
    }
}

impl Default for LlmSection {
    fn default() -> Self {
        Self { provider: LlmKind::Http, http: LlmConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkConfig {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        let d = ChunkParams::default();
        Self { chunk_size: d.chunk_size(), overlap: d.overlap() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    /// Origins allowed by CORS. Empty disables the CORS layer.
    pub cors_origins: Vec<String>,
    /// Environment variable holding the admin token. Unset or empty
    /// variable means admin endpoints are open.
    pub admin_token_env: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into(), cors_origins: Vec::new(), admin_token_env: "ADMIN_TOKEN".into() }
    }
}

/// Whole-application settings, read from TOML with environment overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub storage: StorageConfig,
    pub embedding: EmbeddingConfig,
    pub llm: LlmSection,
    pub retrieval: RetrieverConfig,
    pub chunk: ChunkConfig,
    pub chat: PromptOptions,
    pub server: ServerConfig,
}

impl AppConfig {
    /// Reads `path` (defaults when `None`), applies environment overrides
    /// and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::from_toml_file(p)?,
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.display().to_string(), source: Box::new(e) })
    }

    /// Overrides endpoint settings from `EMBED_BASE_URL`, `EMBED_MODEL`,
    /// `LLM_BASE_URL` and `LLM_MODEL`. API keys are read by the clients
    /// themselves and never enter the config.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        let set = |target: &mut String, key: &str| {
            if let Some(v) = var(key).filter(|v| !v.is_empty()) {
                *target = v;
            }
        };
        set(&mut self.embedding.http.base_url, "EMBED_BASE_URL");
        set(&mut self.embedding.http.model, "EMBED_MODEL");
        set(&mut self.llm.http.base_url, "LLM_BASE_URL");
        set(&mut self.llm.http.model, "LLM_MODEL");
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.retrieval;
        if !(0.0..=1.0).contains(&r.lambda) {
            return Err(invalid("retrieval.lambda", format!("{} is outside [0, 1]", r.lambda)));
        }
        if r.bm25_k == 0 {
            return Err(invalid("retrieval.bm25_k", "must be at least 1"));
        }
        if r.vector_k == 0 {
            return Err(invalid("retrieval.vector_k", "must be at least 1"));
        }
        if !(r.bm25.k1.is_finite() && r.bm25.k1 >= 0.0) {
            return Err(invalid("retrieval.bm25.k1", "must be a non-negative number"));
        }
        if !(0.0..=1.0).contains(&r.bm25.b) {
            return Err(invalid("retrieval.bm25.b", "must be in [0, 1]"));
        }
        self.chunk_params()?;
        if self.chat.n_ctx == 0 {
            return Err(invalid("chat.n_ctx", "must be at least 1"));
        }
        match self.embedding.provider {
            EmbeddingKind::Hashed if self.embedding.dim == 0 => {
                return Err(invalid("embedding.dim", "must be at least 1"));
            }
            EmbeddingKind::Http if self.embedding.http.base_url.trim().is_empty() => {
                return Err(invalid(
                    "embedding.http.base_url",
                    "required for the http provider (or set EMBED_BASE_URL)",
                ));
            }
            EmbeddingKind::Http if self.embedding.http.dim == 0 => {
                return Err(invalid("embedding.http.dim", "must be at least 1"));
            }
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.llm.http.temperature) {
            return Err(invalid("llm.temperature", "must be in [0, 2]"));
        }
        if self.llm.http.timeout_secs == 0 {
            return Err(invalid("llm.timeout_secs", "must be at least 1"));
        }
        self.bind_addr()?;
        for origin in &self.server.cors_origins {
            if origin.parse::<axum::http::HeaderValue>().is_err() || url::Url::parse(origin).is_err() {
                return Err(invalid("server.cors_origins", format!("{origin:?} is not an origin URL")));
            }
        }
        Ok(())
    }

    pub fn chunk_params(&self) -> Result<ChunkParams, ConfigError> {
        ChunkParams::new(self.chunk.chunk_size, self.chunk.overlap).map_err(|e| invalid("chunk", e.to_string()))
    }

    pub fn bind_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.server.bind.parse().map_err(|e| invalid("server.bind", format!("{:?}: {e}", self.server.bind)))
    }

    pub fn prompt_options(&self) -> PromptOptions {
        self.chat
    }

    pub fn admin_token(&self) -> Option<String> {
        std::env::var(&self.server.admin_token_env).ok().filter(|t| !t.is_empty())
    }

    pub fn build_embedder(&self) -> Result<Arc<dyn EmbeddingProvider>, ConfigError> {
        let e = &self.embedding;
        match e.provider {
            EmbeddingKind::Hashed => {
                let mut h =
                    HashedEmbedder::new(e.dim, e.seed).map_err(|err| invalid("embedding.dim", err.to_string()))?;
                if e.synonyms {
                    h = h.with_synonyms(campus_synonyms());
                }
                Ok(Arc::new(h))
            }
            EmbeddingKind::Http => Ok(Arc::new(
                HttpEmbedder::new(e.http.clone()).map_err(|err| invalid("embedding.http", err.to_string()))?,
            )),
        }
    }

    /// The configured chat backend. An HTTP backend without a base URL is
    /// still built; every turn then fails with `llm_not_configured`.
    pub fn build_backend(&self) -> Arc<dyn ChatBackend> {
        match self.llm.provider {
            LlmKind::Echo => Arc::new(crate::chat::EchoBackend),
            LlmKind::Http => match HttpChatBackend::new(self.llm.http.clone()) {
                Ok(b) => Arc::new(b),
                Err(e) => Arc::new(Unconfigured(e)),
            },
        }
    }
}

struct Unconfigured(LlmError);

#[async_trait::async_trait]
impl ChatBackend for Unconfigured {
    async fn complete(&self, _: &[WireMessage]) -> Result<String, LlmError> {
        Err(self.0.clone())
    }
}
