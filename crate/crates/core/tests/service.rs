mod common;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use common::{start_service, ServiceOptions, StubMode, TestService};
use unirag::chat::{BUSY_MESSAGE, MAX_MESSAGE_BYTES, RETRY_MESSAGE};
use unirag::embed::{EmbedError, EmbeddingProvider, EmbeddingVector, ProviderFingerprint};

async fn post_json(svc: &TestService, path: &str, body: Value) -> (u16, Value) {
    let r = svc.http.post(svc.url(path)).json(&body).send().await.unwrap();
    let status = r.status().as_u16();
    (status, r.json().await.unwrap())
}

async fn get_json(svc: &TestService, path: &str) -> (u16, Value) {
    let r = svc.http.get(svc.url(path)).send().await.unwrap();
    let status = r.status().as_u16();
    (status, r.json().await.unwrap())
}

async fn session_len(svc: &TestService, id: &str) -> usize {
    let s = svc.state.engine().sessions().get(id).unwrap().unwrap();
    let len = s.lock().await.messages.len();
    len
}

#[tokio::test]
async fn csv_upload_counts_rows() {
    let svc = start_service(ServiceOptions::default()).await;
    let csv = unirag::syncpipe::sample::PREREQUISITES_TABLE_CSV;
    let url = svc.url("/ingest/csv?table=prerequisites&key=Course");
    let first: Value = svc.http.post(&url).body(csv).send().await.unwrap().json().await.unwrap();
    assert_eq!(first, json!({"inserted": 10, "updated": 0, "unchanged": 0}));
    let second: Value = svc.http.post(&url).body(csv).send().await.unwrap().json().await.unwrap();
    assert_eq!(second, json!({"inserted": 0, "updated": 0, "unchanged": 10}));

    let bad = svc.http.post(svc.url("/ingest/csv?table=x")).body(csv).send().await.unwrap();
    assert_eq!(bad.status(), 400);
    let body: Value = bad.json().await.unwrap();
    assert_eq!(body["code"], "missing_key");
    let bad = svc.http.post(svc.url("/ingest/csv?table=t&key=Nope")).body(csv).send().await.unwrap();
    assert_eq!(bad.status(), 400);
    assert_eq!(bad.json::<Value>().await.unwrap()["code"], "missing_key_column");
}

#[tokio::test]
async fn chat_round_trip_with_echo_backend() {
    let svc = start_service(ServiceOptions::default()).await;
    svc.seed_prerequisites().await;

    let (status, body) = post_json(&svc, "/chat", json!({"message": "What is the prerequisite of CSE221?"})).await;
    assert_eq!(status, 200, "{body}");
    let echoed = svc.stub.last_user_content().unwrap();
    assert_eq!(body["reply"], echoed.trim());
    assert!(echoed.contains("What is the prerequisite of CSE221?"));
    let sources = body["sources"].as_array().unwrap();
    assert!(!sources.is_empty());
    for s in sources {
        assert_eq!(s["table"], "prerequisites");
        assert!(s["id"].as_str().unwrap().starts_with("prerequisites:"));
        assert!(s["combined"].as_f64().unwrap() > 0.0);
    }
    let id = body["session_id"].as_str().unwrap().to_owned();
    assert_eq!(session_len(&svc, &id).await, 2);

    let (status, body) = post_json(&svc, "/chat", json!({"session_id": id, "message": "And CSE220?"})).await;
    assert_eq!(status, 200);
    assert_eq!(body["session_id"], id.as_str());
    assert_eq!(session_len(&svc, &id).await, 4);
    // The second prompt carries the first turn as history.
    let req = svc.stub.requests.lock().unwrap().last().unwrap().clone();
    let roles: Vec<&str> = req["messages"].as_array().unwrap().iter().map(|m| m["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["system", "user", "assistant", "user"]);
}

#[tokio::test]
async fn chat_input_errors() {
    let svc = start_service(ServiceOptions::default()).await;
    let (status, body) = post_json(&svc, "/chat", json!({})).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("empty_message")));
    let (status, _) = post_json(&svc, "/chat", json!({"message": "   "})).await;
    assert_eq!(status, 400);
    let (status, body) = post_json(&svc, "/chat", json!({"session_id": "nope", "message": "hi"})).await;
    assert_eq!((status, body["code"].as_str()), (404, Some("unknown_session")));
    let (status, _) = post_json(&svc, "/chat", json!({"message": "x".repeat(MAX_MESSAGE_BYTES + 1)})).await;
    assert_eq!(status, 413);

    let r = svc
        .http
        .post(svc.url("/chat"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 400);
    let body: Value = r.json().await.unwrap();
    assert!(body["code"].is_string() && body["message"].is_string());
}

#[tokio::test]
async fn chat_backend_failures_return_503_with_retry_text() {
    let svc = start_service(ServiceOptions::default()).await;
    svc.seed_prerequisites().await;
    svc.stub.set_mode(StubMode::Fail(503));
    let (status, body) = post_json(&svc, "/chat", json!({"message": "Who teaches CSE220?"})).await;
    assert_eq!(status, 503);
    assert_eq!(body["message"], RETRY_MESSAGE);
    assert_eq!(body["code"], "llm_unavailable");
    let id = body["session_id"].as_str().unwrap();
    assert_eq!(session_len(&svc, id).await, 2);

    svc.stub.set_mode(StubMode::Fail(429));
    let (status, body) = post_json(&svc, "/chat", json!({"session_id": id, "message": "Again?"})).await;
    assert_eq!(status, 503);
    assert_eq!(body["message"], BUSY_MESSAGE);
    assert_eq!(session_len(&svc, id).await, 4);
}

fn store_digest(svc: &TestService) -> String {
    let dir = svc.dir.path().join("vectors");
    let mut h = Sha256::new();
    for name in ["manifest.json", "records.bin", "cursor.json"] {
        h.update(std::fs::read(dir.join(name)).unwrap_or_default());
    }
    let snap = svc.state.retriever().snapshot();
    for r in snap.store.records() {
        h.update(r.id.as_bytes());
        h.update(r.document.as_bytes());
    }
    hex::encode(h.finalize())
}

#[tokio::test]
async fn search_endpoint() {
    let svc = start_service(ServiceOptions::default()).await;
    let (status, body) = get_json(&svc, "/search?q=anything").await;
    assert_eq!((status, body), (200, json!([])));

    svc.seed_prerequisites().await;
    let (status, body) = get_json(&svc, "/search?q=CSE221&k=0").await;
    assert_eq!((status, body["code"].as_str()), (400, Some("invalid_k")));
    let (status, _) = get_json(&svc, "/search?q=CSE221&k=-3").await;
    assert_eq!(status, 400);
    let (status, _) = get_json(&svc, "/search?k=3").await;
    assert_eq!(status, 400);
    let (status, _) = get_json(&svc, "/search?q=x&k=abc").await;
    assert_eq!(status, 400);

    let (status, body) = get_json(&svc, "/search?q=prerequisite%20chain%20CSE321&k=5&explain=true").await;
    assert_eq!(status, 200);
    let hits = body.as_array().unwrap();
    assert_eq!(hits.len(), 5);
    assert!(hits[0]["id"].as_str().unwrap().contains(":chain:"));
    for w in hits.windows(2) {
        assert!(w[0]["combined"].as_f64() >= w[1]["combined"].as_f64());
    }
    for h in hits {
        let norm = h["bm25_norm"].as_f64().unwrap();
        let sim = h["distance"].as_f64().map_or(0.0, |d| 1.0 / (1.0 + d));
        assert!((h["similarity"].as_f64().unwrap() - sim).abs() < 1e-12);
        assert!((h["combined"].as_f64().unwrap() - (0.5 * norm + 0.5 * sim)).abs() < 1e-9);
        assert!(h["bm25_raw"].is_number() && h["document"].is_string());
    }

    let (_, plain) = get_json(&svc, "/search?q=prerequisite%20chain%20CSE321&k=5").await;
    assert!(plain[0].get("bm25_raw").is_none());
    assert_eq!(plain[0]["id"], hits[0]["id"]);

    let (_, lexical) = get_json(&svc, "/search?q=CSE321&k=3&explain=true&lambda=1").await;
    assert!(lexical[0]["bm25_norm"].as_f64().unwrap() == 1.0);
    let (status, _) = get_json(&svc, "/search?q=CSE321&lambda=2").await;
    assert_eq!(status, 400);
}

#[tokio::test]
async fn search_has_no_side_effects() {
    let svc = start_service(ServiceOptions::default()).await;
    svc.seed_prerequisites().await;
    let before = store_digest(&svc);
    for i in 0..100 {
        let r = svc.http.get(svc.url(&format!("/search?q=CSE{}&k=3&explain=true", 110 + i))).send().await.unwrap();
        assert_eq!(r.status(), 200);
    }
    assert_eq!(store_digest(&svc), before);
}

#[tokio::test]
async fn admin_token_guards_mutations() {
    let svc = start_service(ServiceOptions { admin_token: Some("s3cret".into()), ..Default::default() }).await;
    let r = svc.http.post(svc.url("/sync")).send().await.unwrap();
    assert_eq!(r.status(), 401);
    assert_eq!(r.json::<Value>().await.unwrap()["code"], "unauthorized");
    let r = svc.http.post(svc.url("/sync")).bearer_auth("wrong").send().await.unwrap();
    assert_eq!(r.status(), 401);
    let r = svc.http.post(svc.url("/ingest/csv?table=t&key=a")).body("a\n1\n").send().await.unwrap();
    assert_eq!(r.status(), 401);
    let r =
        svc.http.post(svc.url("/ingest/csv?table=t&key=a")).bearer_auth("s3cret").body("a\n1\n").send().await.unwrap();
    assert_eq!(r.status(), 200);
    let r = svc.http.post(svc.url("/sync")).bearer_auth("s3cret").send().await.unwrap();
    assert_eq!(r.status(), 200);
    // Reads stay open.
    assert_eq!(svc.http.get(svc.url("/healthz")).send().await.unwrap().status(), 200);
    assert_eq!(svc.http.get(svc.url("/search?q=a")).send().await.unwrap().status(), 200);
}

/// Embedder whose calls wait for permits, so a sync can be held open.
struct GatedEmbedder {
    inner: Arc<unirag::embed::HashedEmbedder>,
    gate: Arc<Semaphore>,
}

#[async_trait]
impl EmbeddingProvider for GatedEmbedder {
    fn fingerprint(&self) -> ProviderFingerprint {
        self.inner.fingerprint()
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        self.gate.acquire().await.unwrap().forget();
        self.inner.embed_batch(texts).await
    }
}

#[tokio::test]
async fn background_sync_job_and_conflict() {
    let gate = Arc::new(Semaphore::new(0));
    let embedder = Arc::new(GatedEmbedder { inner: common::synonym_embedder(), gate: gate.clone() });
    let svc = start_service(ServiceOptions { embedder, ..Default::default() }).await;
    let csv = unirag::syncpipe::sample::PREREQUISITES_TABLE_CSV;
    svc.http.post(svc.url("/ingest/csv?table=prerequisites&key=Course")).body(csv).send().await.unwrap();

    let r = svc.http.post(svc.url("/sync?background=true")).send().await.unwrap();
    assert_eq!(r.status(), 202);
    let accepted: Value = r.json().await.unwrap();
    let job_url = svc.url(accepted["status_url"].as_str().unwrap());
    let job: Value = svc.http.get(&job_url).send().await.unwrap().json().await.unwrap();
    assert_eq!(job["status"], "running");

    let r = svc.http.post(svc.url("/sync")).send().await.unwrap();
    assert_eq!(r.status(), 409);
    assert_eq!(r.json::<Value>().await.unwrap()["code"], "job_running");
    let r = svc.http.post(svc.url("/ingest/csv?table=prerequisites&key=Course")).body(csv).send().await.unwrap();
    assert_eq!(r.status(), 409);

    gate.add_permits(1_000);
    let mut job = Value::Null;
    for _ in 0..200 {
        job = svc.http.get(&job_url).send().await.unwrap().json().await.unwrap();
        if job["status"] != "running" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    assert_eq!(job["status"], "succeeded", "{job}");
    assert_eq!(job["result"]["docs_embedded"], 19);
    assert_eq!(svc.state.retriever().snapshot().store.len(), 19);

    let (status, body) = get_json(&svc, "/jobs/not-a-job").await;
    assert_eq!((status, body["code"].as_str()), (404, Some("unknown_job")));
}

#[tokio::test]
async fn healthz_reports_counts() {
    let svc = start_service(ServiceOptions::default()).await;
    let (status, body) = get_json(&svc, "/healthz").await;
    assert_eq!(status, 200);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["counts"]["vector_records"], 0);

    svc.seed_prerequisites().await;
    post_json(&svc, "/chat", json!({"message": "hello"})).await;
    let (_, body) = get_json(&svc, "/healthz").await;
    assert_eq!(body["status"], "ok");
    assert_eq!(body["counts"]["tables"]["prerequisites"], svc.state.relational().row_count("prerequisites").unwrap());
    assert_eq!(body["counts"]["vector_records"], svc.state.retriever().snapshot().store.len());
    assert_eq!(body["counts"]["sessions"], 1);
    assert_eq!(body["versions"]["store_format"], unirag::vecstore::FORMAT_VERSION);
}

#[tokio::test]
async fn unreadable_store_is_degraded() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = dir.path().join("vectors");
    std::fs::create_dir_all(&vectors).unwrap();
    std::fs::write(vectors.join("manifest.json"), "{ not a manifest").unwrap();
    let svc = common::start_service_in(dir, ServiceOptions::default()).await;
    let (status, body) = get_json(&svc, "/healthz").await;
    assert_eq!(status, 200);
    assert_eq!(body["status"], "degraded");
    assert!(body["problems"][0].as_str().unwrap().contains("vector store"));
}

#[tokio::test]
async fn errors_are_json_everywhere() {
    let svc = start_service(ServiceOptions::default()).await;
    let r = svc.http.get(svc.url("/no/such/route")).send().await.unwrap();
    assert_eq!(r.status(), 404);
    assert_eq!(r.json::<Value>().await.unwrap()["code"], "not_found");
    let r = svc.http.get(svc.url("/chat")).send().await.unwrap();
    assert_eq!(r.status(), 405);
    assert_eq!(r.json::<Value>().await.unwrap()["code"], "method_not_allowed");
    let r = svc.http.post(svc.url("/ingest/csv?table=bad-name&key=a")).body("a\n1\n").send().await.unwrap();
    assert_eq!(r.status(), 400);
    assert_eq!(r.json::<Value>().await.unwrap()["code"], "invalid_table");
}

#[tokio::test]
async fn cors_allows_configured_origin() {
    let origin = "http://localhost:5173";
    let svc = start_service(ServiceOptions { cors_origins: vec![origin.into()], ..Default::default() }).await;
    let r = svc.http.get(svc.url("/healthz")).header("origin", origin).send().await.unwrap();
    assert_eq!(r.headers()["access-control-allow-origin"], origin);
    let r = svc.http.get(svc.url("/healthz")).header("origin", "http://evil.example").send().await.unwrap();
    assert!(r.headers().get("access-control-allow-origin").is_none());
}

#[tokio::test]
async fn web_ingest_and_sync_over_http() {
    use axum::routing::get;
    let page = Arc::new(std::sync::Mutex::new("<html><body><p>Library opens at 8am.</p></body></html>".to_owned()));
    let served = page.clone();
    let site = axum::Router::new().route(
        "/hours",
        get(move || {
            let p = served.lock().unwrap().clone();
            async move { axum::response::Html(p) }
        }),
    );
    let site_addr = common::spawn_router(site).await;

    let svc = start_service(ServiceOptions::default()).await;
    let list = format!("# campus pages\nhttp://{site_addr}/hours\nnot a url\n");
    let post = || svc.http.post(svc.url("/ingest/web")).body(list.clone()).send();
    let body: Value = post().await.unwrap().json().await.unwrap();
    assert_eq!(body["summary"], json!({"new_versions": 1, "unchanged": 0, "failed": 1}));
    let body: Value = post().await.unwrap().json().await.unwrap();
    assert_eq!(body["summary"]["unchanged"], 1);

    *page.lock().unwrap() = "<html><body><p>Library opens at 9am.</p></body></html>".into();
    let body: Value = post().await.unwrap().json().await.unwrap();
    assert_eq!(body["reports"][0]["outcome"], json!({"outcome": "new_version", "version": 2}));

    assert_eq!(svc.http.post(svc.url("/sync")).send().await.unwrap().status(), 200);
    let (_, hits) = get_json(&svc, "/search?q=library%20opens&k=1").await;
    assert!(hits[0]["document"].as_str().unwrap().contains("9am"));
    assert_eq!(hits[0]["metadata"]["table"], "web");
}
