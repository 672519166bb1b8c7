//! HTTP JSON API over the whole pipeline, plus the application config.
//!
//! Every response is JSON; errors use [`ErrorBody`]. Admin routes (ingest,
//! sync, jobs) require `Authorization: Bearer <token>` when an admin token is
//! configured, and share one job lock: a second job while one runs gets 409.

mod config;
mod error;
mod routes;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    AppConfig, ChunkConfig, ConfigError, EmbeddingConfig, EmbeddingKind, LlmKind, LlmSection, ServerConfig,
    StorageConfig,
};
pub use error::{ApiError, ErrorBody};
pub use routes::{router, ChatRequest, ChatResponse, HealthReport, JobAccepted};

use crate::chat::{ChatBackend, ChatEngine, SessionStore};
use crate::clock::{Clock, SystemClock, Timestamp};
use crate::embed::EmbeddingProvider;
use crate::ingest::{IngestError, RelationalStore};
use crate::retriever::{HybridRetriever, RetrieveError};
use crate::vecstore::{StoreError, VectorStore};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("relational store: {0}")]
    Relational(#[from] IngestError),
    #[error("retriever: {0}")]
    Retriever(#[from] RetrieveError),
    #[error("sessions: {0}")]
    Sessions(std::io::Error),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Succeeded,
    Failed,
}

/// A background admin job, as returned by `GET /jobs/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: String,
    pub status: JobStatus,
    pub started_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

/// Everything the service needs, supplied by the caller. Tests use this to
/// plug in stub backends and in-memory stores.
pub struct ServiceParts {
    pub config: AppConfig,
    pub relational: RelationalStore,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub backend: Arc<dyn ChatBackend>,
    pub sessions: SessionStore,
    pub clock: Arc<dyn Clock>,
    pub admin_token: Option<String>,
}

pub struct AppState {
    config: AppConfig,
    relational: RelationalStore,
    vector_dir: PathBuf,
    embedder: Arc<dyn EmbeddingProvider>,
    engine: ChatEngine,
    clock: Arc<dyn Clock>,
    admin_token: Option<String>,
    job_lock: Arc<tokio::sync::Mutex<()>>,
    jobs: Mutex<HashMap<String, JobRecord>>,
    /// Why the vector store could not be loaded, until a sync replaces it.
    store_problem: Mutex<Option<String>>,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState")
            .field("vector_dir", &self.vector_dir)
            .field("admin_token", &self.admin_token.as_ref().map(|_| "<redacted>"))
            .finish_non_exhaustive()
    }
}

impl AppState {
    /// Opens the stores and clients named by `config`.
    pub fn open(config: AppConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let relational = RelationalStore::open(&config.storage.relational_db())?;
        let sessions = SessionStore::persistent(config.storage.session_dir()).map_err(ServiceError::Sessions)?;
        let parts = ServiceParts {
            embedder: config.build_embedder()?,
            backend: config.build_backend(),
            admin_token: config.admin_token(),
            clock: Arc::new(SystemClock),
            relational,
            sessions,
            config,
        };
        Self::from_parts(parts)
    }

    /// Loads the vector store from the configured directory. A store that
    /// cannot be read leaves the service up, empty and `degraded`.
    pub fn from_parts(parts: ServiceParts) -> Result<Self, ServiceError> {
        let ServiceParts { config, relational, embedder, backend, sessions, clock, admin_token } = parts;
        config.validate()?;
        let vector_dir = config.storage.vector_dir();
        let fingerprint = embedder.fingerprint();
        let (store, problem) = match VectorStore::load_or_new(&vector_dir, &fingerprint) {
            Ok(s) => (s, None),
            Err(e) => {
                log::error!("vector store at {} is unusable: {e}", vector_dir.display());
                (VectorStore::new(fingerprint), Some(describe_store_error(&e)))
            }
        };
        let retriever = Arc::new(HybridRetriever::new(store, embedder.clone(), config.retrieval)?);
        let engine = ChatEngine::new(retriever, backend, sessions, config.prompt_options(), clock.clone());
        Ok(Self {
            config,
            relational,
            vector_dir,
            embedder,
            engine,
            clock,
            admin_token,
            job_lock: Arc::new(tokio::sync::Mutex::new(())),
            jobs: Mutex::new(HashMap::new()),
            store_problem: Mutex::new(problem),
        })
    }

    pub fn config(&self) -> &AppConfig {
        &self.config
    }

    pub fn relational(&self) -> &RelationalStore {
        &self.relational
    }

    pub fn engine(&self) -> &ChatEngine {
        &self.engine
    }

    pub fn retriever(&self) -> &Arc<HybridRetriever> {
        self.engine.retriever()
    }

    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.jobs.lock().unwrap_or_else(|p| p.into_inner()).get(id).cloned()
    }

    fn set_store_problem(&self, problem: Option<String>) {
        *self.store_problem.lock().unwrap_or_else(|p| p.into_inner()) = problem;
    }

    fn store_problem(&self) -> Option<String> {
        self.store_problem.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

fn describe_store_error(e: &StoreError) -> String {
    format!("vector store unreadable: {e}")
}

/// Binds the configured address and serves until Ctrl-C.
pub async fn serve(config: AppConfig) -> Result<(), ServiceError> {
    let addr = config.bind_addr()?;
    let state = Arc::new(AppState::open(config)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
