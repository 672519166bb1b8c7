use std::collections::BTreeMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use super::{ApiError, AppState, JobRecord, JobStatus};
use crate::chat::{ChatError, SourceRef};
use crate::ingest::{fetch_urls, FetchOptions, UrlStatus};
use crate::syncpipe::run_sync;
use crate::vecstore::{RecordMetadata, FORMAT_VERSION};

/// Largest accepted request body (CSV uploads, URL lists).
const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

pub fn router(state: Arc<AppState>) -> Router {
    let cors = cors_layer(&state.config.server.cors_origins);
    let router = Router::new()
        .route("/chat", post(chat))
        .route("/search", get(search))
        .route("/ingest/csv", post(ingest_csv))
        .route("/ingest/web", post(ingest_web))
        .route("/sync", post(sync))
        .route("/jobs/{id}", get(job))
        .route("/healthz", get(healthz))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state);
    match cors {
        Some(c) => router.layer(c),
        None => router,
    }
}

fn cors_layer(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let list: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
    Some(
        CorsLayer::new()
            .allow_origin(AllowOrigin::list(list))
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION]),
    )
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this endpoint")
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(t)| t).map_err(|e| ApiError::new(e.status(), "bad_request", e.body_text()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(t)| t).map_err(|e| ApiError::bad_request("bad_query", e.body_text()))
}

fn raw_body(body: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    body.map_err(|e| ApiError::new(e.status(), "bad_body", e.body_text()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub reply: String,
    pub sources: Vec<SourceRef>,
}

async fn chat(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ChatRequest>, JsonRejection>,
) -> Result<Json<ChatResponse>, ApiError> {
    let req = json_body(body)?;
    let message = req.message.unwrap_or_default();
    let turn = state.engine.ask(req.session_id.as_deref(), &message).await.map_err(|e| match e {
        ChatError::EmptyMessage => ApiError::bad_request("empty_message", e.to_string()),
        ChatError::MessageTooLong => ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "message_too_long", e.to_string()),
        ChatError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", e.to_string()),
        ChatError::Retrieve(r) => r.into(),
        ChatError::Session(io) => ApiError::internal(format!("session storage: {io}")),
    })?;
    if let Some(failure) = turn.failure {
        let mut err = ApiError::new(StatusCode::SERVICE_UNAVAILABLE, &failure.code, failure.message);
        err.body.session_id = Some(turn.session_id);
        return Err(err);
    }
    Ok(Json(ChatResponse { session_id: turn.session_id, reply: turn.reply, sources: turn.sources }))
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    q: Option<String>,
    k: Option<i64>,
    #[serde(default)]
    explain: bool,
    lambda: Option<f64>,
}

/// A hit without the score breakdown.
#[derive(Serialize)]
struct PlainHit {
    id: String,
    document: String,
    metadata: RecordMetadata,
    combined: f64,
}

async fn search(
    State(state): State<Arc<AppState>>,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let p = query(params)?;
    let q = p.q.unwrap_or_default();
    if q.trim().is_empty() {
        return Err(ApiError::bad_request("empty_query", "query parameter q is required"));
    }
    let k = p.k.unwrap_or(5);
    if k < 1 {
        return Err(ApiError::bad_request("invalid_k", "k must be at least 1"));
    }
    let retriever = state.retriever();
    let lambda = p.lambda.unwrap_or(retriever.config().lambda);
    let hits = retriever.retrieve_with_lambda(&q, k as usize, lambda).await?;
    if p.explain {
        return Ok(Json(hits).into_response());
    }
    let plain: Vec<PlainHit> = hits
        .into_iter()
        .map(|h| PlainHit { id: h.id, document: h.document, metadata: h.metadata, combined: h.scores.combined })
        .collect();
    Ok(Json(plain).into_response())
}

fn check_admin(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let Some(expected) = &state.admin_token else {
        return Ok(());
    };
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .unwrap_or("");
    // Length leaks, contents do not.
    let same = given.len() == expected.len()
        && given.bytes().zip(expected.bytes()).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0;
    if same {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong admin token"))
    }
}

#[derive(Debug, Deserialize)]
struct JobParams {
    #[serde(default)]
    background: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: String,
    pub status_url: String,
}

/// Runs `work` under the job lock, inline or as a background job.
async fn run_job<F, Fut>(state: Arc<AppState>, kind: &str, background: bool, work: F) -> Result<Response, ApiError>
where
    F: FnOnce(Arc<AppState>) -> Fut + Send + 'static,
    Fut: Future<Output = Result<serde_json::Value, ApiError>> + Send + 'static,
{
    let guard = state
        .job_lock
        .clone()
        .try_lock_owned()
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "job_running", "another ingest or sync job is running"))?;
    if !background {
        let value = work(state).await?;
        drop(guard);
        return Ok(Json(value).into_response());
    }

    let id = uuid::Uuid::new_v4().to_string();
    let record = JobRecord {
        id: id.clone(),
        kind: kind.to_owned(),
        status: JobStatus::Running,
        started_at: state.clock.now(),
        finished_at: None,
        result: None,
        error: None,
    };
    state.jobs.lock().unwrap_or_else(|p| p.into_inner()).insert(id.clone(), record);
    let job_state = state.clone();
    let job_id = id.clone();
    tokio::spawn(async move {
        let outcome = work(job_state.clone()).await;
        drop(guard);
        let mut jobs = job_state.jobs.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(rec) = jobs.get_mut(&job_id) {
            rec.finished_at = Some(job_state.clock.now());
            match outcome {
                Ok(v) => {
                    rec.status = JobStatus::Succeeded;
                    rec.result = Some(v);
                }
                Err(e) => {
                    rec.status = JobStatus::Failed;
                    rec.error = Some(e.body);
                }
            }
        }
    });
    let accepted = JobAccepted { status_url: format!("/jobs/{id}"), job_id: id };
    Ok((StatusCode::ACCEPTED, Json(accepted)).into_response())
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, ApiError> {
    serde_json::to_value(v).map_err(|e| ApiError::internal(e.to_string()))
}

#[derive(Debug, Deserialize)]
struct CsvParams {
    table: Option<String>,
    /// Comma-separated natural-key columns.
    key: Option<String>,
    #[serde(default)]
    background: bool,
}

async fn ingest_csv(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    params: Result<Query<CsvParams>, QueryRejection>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    check_admin(&state, &headers)?;
    let p = query(params)?;
    let body = raw_body(body)?;
    let table = p
        .table
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ApiError::bad_request("missing_table", "query parameter table is required"))?;
    let keys: Vec<String> =
        p.key.unwrap_or_default().split(',').map(|k| k.trim().to_owned()).filter(|k| !k.is_empty()).collect();
    if keys.is_empty() {
        return Err(ApiError::bad_request("missing_key", "query parameter key is required"));
    }
    run_job(state, "ingest_csv", p.background, move |state| async move {
        let stats = tokio::task::spawn_blocking(move || {
            state.relational.ingest_csv(&body, &table, &keys, state.clock.as_ref())
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
        to_value(&stats)
    })
    .await
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct WebSummary {
    new_versions: usize,
    unchanged: usize,
    failed: usize,
}

async fn ingest_web(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    params: Result<Query<JobParams>, QueryRejection>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    check_admin(&state, &headers)?;
    let p = query(params)?;
    let body = raw_body(body)?;
    let list =
        String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("bad_body", "URL list must be UTF-8"))?;
    run_job(state, "ingest_web", p.background, move |state| async move {
        let reports = fetch_urls(&state.relational, &list, &FetchOptions::default(), state.clock.as_ref()).await;
        let mut summary = WebSummary::default();
        for r in &reports {
            match &r.status {
                UrlStatus::Snapshot { outcome: crate::ingest::SnapshotOutcome::Unchanged } => summary.unchanged += 1,
                UrlStatus::Snapshot { .. } => summary.new_versions += 1,
                _ => summary.failed += 1,
            }
        }
        Ok(serde_json::json!({ "summary": to_value(&summary)?, "reports": to_value(&reports)? }))
    })
    .await
}

async fn sync(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    params: Result<Query<JobParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    check_admin(&state, &headers)?;
    let p = query(params)?;
    run_job(state, "sync", p.background, |state| async move {
        let chunk = state.config.chunk_params().map_err(|e| ApiError::internal(e.to_string()))?;
        let outcome =
            run_sync(&state.relational, &state.vector_dir, state.embedder.as_ref(), chunk, state.clock.as_ref())
                .await?;
        if let Some(store) = outcome.store {
            state.retriever().replace_store(store).map_err(|e| ApiError::internal(e.to_string()))?;
            state.set_store_problem(None);
        }
        to_value(&outcome.stats)
    })
    .await
}

async fn job(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<JobRecord>, ApiError> {
    check_admin(&state, &headers)?;
    state
        .job(&id)
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_job", format!("no job {id:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthVersions {
    pub service: String,
    pub store_format: u32,
    pub embedding: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HealthCounts {
    /// Rows per ingested table.
    pub tables: BTreeMap<String, usize>,
    pub web_snapshots: usize,
    pub vector_records: usize,
    pub sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    /// `ok` or `degraded`.
    pub status: String,
    pub versions: HealthVersions,
    pub counts: HealthCounts,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub problems: Vec<String>,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<HealthReport> {
    let mut problems = Vec::new();
    let mut counts = HealthCounts {
        vector_records: state.retriever().snapshot().store.len(),
        sessions: state.engine.sessions().len(),
        ..Default::default()
    };
    if let Some(p) = state.store_problem() {
        problems.push(p);
    }
    let rel = &state.relational;
    let relational = rel.check().and_then(|()| {
        for t in rel.tables()? {
            let n = rel.row_count(&t.name)?;
            counts.tables.insert(t.name, n);
        }
        counts.web_snapshots = rel.snapshot_count()?;
        Ok(())
    });
    if let Err(e) = relational {
        problems.push(format!("relational store unreadable: {e}"));
    }
    Json(HealthReport {
        status: if problems.is_empty() { "ok" } else { "degraded" }.into(),
        versions: HealthVersions {
            service: env!("CARGO_PKG_VERSION").into(),
            store_format: FORMAT_VERSION,
            embedding: state.embedder.fingerprint().to_string(),
        },
        counts,
        problems,
    })
}
