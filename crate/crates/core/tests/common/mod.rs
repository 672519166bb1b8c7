//! Fixtures and oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use unirag::embed::{
    campus_synonyms, embed_texts, EmbedError, EmbeddingProvider, EmbeddingVector, HashedEmbedder, ProviderFingerprint,
};
use unirag::vecstore::{RecordMetadata, VectorRecord, VectorStore};

/// The 20-document campus fixture: (id, text).
pub const SYNONYM_DOCS: [(&str, &str); 20] = [
    ("d01", "Final year thesis submissions close in week twelve."),
    ("d02", "Tuition is paid in three installments each semester."),
    ("d03", "Merit scholarship holders must keep a GPA above 3.5."),
    ("d04", "Advising slots open before preregistration starts."),
    ("d05", "The exam timetable is published on the notice board."),
    ("d06", "Dr. Rahman sits in office 7G-12 on the seventh floor."),
    ("d07", "Send leave applications by email to the registrar."),
    ("d08", "Library regulations forbid food in the reading hall."),
    ("d09", "Each lecturer posts consultation hours online."),
    ("d10", "Grading for lab work uses a relative curve."),
    ("d11", "CSE220 is a prerequisite for CSE221."),
    ("d12", "Each class is capped at forty students."),
    ("d13", "Parking permits are issued at the security desk."),
    ("d14", "The cafeteria serves lunch from noon until three."),
    ("d15", "A shuttle bus leaves the main gate every hour."),
    ("d16", "Gym membership is free for enrolled students."),
    ("d17", "Hostel curfew is at eleven on weeknights."),
    ("d18", "Replacement ID cards cost two hundred taka."),
    ("d19", "Campus wifi passwords reset every ninety days."),
    ("d20", "Convocation gowns can be rented from the alumni office."),
];

/// Queries whose words occur in exactly one fixture document.
pub const LITERAL_QUERIES: [(&str, &str); 8] = [
    ("parking", "d13"),
    ("cafeteria lunch", "d14"),
    ("shuttle", "d15"),
    ("hostel curfew", "d17"),
    ("convocation gowns", "d20"),
    ("installments", "d02"),
    ("preregistration", "d04"),
    ("relative curve", "d10"),
];

/// Queries sharing no word with any fixture document, only a synonym.
pub const SYNONYM_QUERIES: [(&str, &str); 8] = [
    ("dissertation", "d01"),
    ("fee", "d02"),
    ("waiver", "d03"),
    ("counselling", "d04"),
    ("routine", "d05"),
    ("rules", "d08"),
    ("professor", "d09"),
    ("marks", "d10"),
];

pub fn synonym_embedder() -> Arc<HashedEmbedder> {
    Arc::new(HashedEmbedder::new(256, 0).unwrap().with_synonyms(campus_synonyms()))
}

pub async fn store_from_docs<P: EmbeddingProvider + ?Sized>(provider: &P, docs: &[(&str, &str)]) -> VectorStore {
    let mut store = VectorStore::new(provider.fingerprint());
    if docs.is_empty() {
        return store;
    }
    let texts: Vec<String> = docs.iter().map(|d| d.1.to_owned()).collect();
    let vectors = embed_texts(provider, &texts).await.unwrap();
    let records = docs
        .iter()
        .zip(vectors)
        .map(|((id, text), vector)| VectorRecord {
            id: id.to_string(),
            vector,
            document: text.to_string(),
            metadata: RecordMetadata {
                table: "fixture".into(),
                source_id: id.to_string(),
                facet: "row".into(),
                chunk_index: 0,
                rendered_at: 0,
            },
        })
        .collect();
    store.upsert(records).unwrap();
    store
}

/// Gives every distinct text its own axis, so distinct tokens are orthogonal.
#[derive(Debug, Default)]
pub struct OneHotEmbedder {
    axes: Mutex<HashMap<String, usize>>,
}

pub const ONE_HOT_DIM: usize = 64;

#[async_trait]
impl EmbeddingProvider for OneHotEmbedder {
    fn fingerprint(&self) -> ProviderFingerprint {
        ProviderFingerprint { name: "one-hot".into(), model: "test".into(), dim: ONE_HOT_DIM }
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut axes = self.axes.lock().unwrap();
        texts
            .iter()
            .map(|t| {
                let next = axes.len();
                let axis = *axes.entry(t.clone()).or_insert(next);
                if axis >= ONE_HOT_DIM {
                    return Err(EmbedError::Config("one-hot vocabulary exhausted".into()));
                }
                let mut v = vec![0.0; ONE_HOT_DIM];
                v[axis] = 1.0;
                EmbeddingVector::new(v)
            })
            .collect()
    }
}

/// Independent Okapi BM25 scorer: one pass per document, no index.
pub fn brute_force_bm25(docs: &[Vec<String>], query: &[String], k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    docs.iter()
        .map(|d| {
            let dl = d.len() as f64;
            query
                .iter()
                .map(|q| {
                    let df = docs.iter().filter(|x| x.contains(q)).count() as f64;
                    let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                    let tf = d.iter().filter(|t| *t == q).count() as f64;
                    if tf == 0.0 {
                        0.0
                    } else {
                        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl))
                    }
                })
                .sum()
        })
        .collect()
}

/// What the stub chat endpoint does with each request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StubMode {
    /// Answer with the content of the last message.
    Echo,
    /// Fail with this HTTP status.
    Fail(u16),
}

#[derive(Clone)]
pub struct StubLlm {
    pub mode: Arc<Mutex<StubMode>>,
    /// Every request body received.
    pub requests: Arc<Mutex<Vec<Value>>>,
    /// Every Authorization header received.
    pub auth_headers: Arc<Mutex<Vec<String>>>,
    pub base_url: String,
}

impl StubLlm {
    pub fn set_mode(&self, mode: StubMode) {
        *self.mode.lock().unwrap() = mode;
    }

    pub fn last_user_content(&self) -> Option<String> {
        let reqs = self.requests.lock().unwrap();
        let last = reqs.last()?;
        let messages = last["messages"].as_array()?;
        messages.last()?["content"].as_str().map(str::to_owned)
    }
}

async fn stub_completions(State(stub): State<StubLlm>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    if let Some(auth) = headers.get("authorization").and_then(|v| v.to_str().ok()) {
        stub.auth_headers.lock().unwrap().push(auth.to_owned());
    }
    let content =
        body["messages"].as_array().and_then(|m| m.last()).and_then(|m| m["content"].as_str()).unwrap_or("").to_owned();
    stub.requests.lock().unwrap().push(body);
    let mode = *stub.mode.lock().unwrap();
    match mode {
        StubMode::Echo => {
            Json(json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] })).into_response()
        }
        StubMode::Fail(code) => (StatusCode::from_u16(code).unwrap(), "upstream unavailable").into_response(),
    }
}

/// Starts an in-process chat-completion endpoint on a loopback port.
pub async fn spawn_stub_llm(mode: StubMode) -> StubLlm {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let stub = StubLlm {
        mode: Arc::new(Mutex::new(mode)),
        requests: Arc::default(),
        auth_headers: Arc::default(),
        base_url: format!("http://{addr}/v1"),
    };
    let app = Router::new().route("/v1/chat/completions", post(stub_completions)).with_state(stub.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    stub
}

/// Serves `router` on a loopback port and returns its address.
pub async fn spawn_router(router: Router) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    addr
}

/// A running service wired to a stub chat endpoint, over temporary stores.
pub struct TestService {
    pub base: String,
    pub state: Arc<unirag::service::AppState>,
    pub stub: StubLlm,
    pub http: reqwest::Client,
    pub dir: tempfile::TempDir,
}

pub struct ServiceOptions {
    pub admin_token: Option<String>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub cors_origins: Vec<String>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self { admin_token: None, embedder: synonym_embedder(), cors_origins: Vec::new() }
    }
}

pub async fn start_service(options: ServiceOptions) -> TestService {
    let dir = tempfile::tempdir().unwrap();
    start_service_in(dir, options).await
}

pub async fn start_service_in(dir: tempfile::TempDir, options: ServiceOptions) -> TestService {
    use unirag::chat::{HttpChatBackend, LlmConfig, SessionStore};
    use unirag::service::{router, AppConfig, AppState, ServiceParts};

    let stub = spawn_stub_llm(StubMode::Echo).await;
    let mut config = AppConfig::default();
    config.storage.data_dir = dir.path().to_path_buf();
    config.server.cors_origins = options.cors_origins;
    let llm = LlmConfig {
        base_url: stub.base_url.clone(),
        model: "stub".into(),
        api_key_env: "UNIRAG_TEST_UNSET_KEY".into(),
        timeout_secs: 5,
        ..LlmConfig::default()
    };
    let parts = ServiceParts {
        relational: unirag::ingest::RelationalStore::open(&config.storage.relational_db()).unwrap(),
        sessions: SessionStore::persistent(config.storage.session_dir()).unwrap(),
        backend: Arc::new(HttpChatBackend::new(llm).unwrap()),
        embedder: options.embedder,
        clock: Arc::new(unirag::clock::SystemClock),
        admin_token: options.admin_token,
        config,
    };
    let state = Arc::new(AppState::from_parts(parts).unwrap());
    let addr = spawn_router(router(state.clone())).await;
    TestService { base: format!("http://{addr}"), state, stub, http: reqwest::Client::new(), dir }
}

impl TestService {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// Ingests the bundled prerequisites table and syncs it.
    pub async fn seed_prerequisites(&self) {
        let csv = unirag::syncpipe::sample::PREREQUISITES_TABLE_CSV;
        let r = self.http.post(self.url("/ingest/csv?table=prerequisites&key=Course")).body(csv).send().await.unwrap();
        assert_eq!(r.status(), 200);
        let r = self.http.post(self.url("/sync")).send().await.unwrap();
        assert_eq!(r.status(), 200);
    }
}
