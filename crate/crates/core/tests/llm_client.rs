mod common;

use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use axum::routing::post;
use axum::Router;

use common::{spawn_stub_llm, StubMode};
use unirag::chat::{
    build_prompt, generate_reply, handle_failure, ChatBackend, ChatEngine, ChatSession, HttpChatBackend, LlmConfig,
    LlmError, PromptOptions, Role, SessionStore, WireMessage,
};
use unirag::clock::{SystemClock, Timestamp};
use unirag::retriever::{HybridRetriever, RetrieverConfig};

const CANARY_ENV: &str = "UNIRAG_TEST_CANARY_LLM_KEY";
const CANARY: &str = "sk-canary-7c1d9e0b42aa";

/// Collects every log line emitted by this test binary.
struct Capture(Mutex<Vec<String>>);

impl log::Log for Capture {
    fn enabled(&self, _: &log::Metadata) -> bool {
        true
    }

    fn log(&self, record: &log::Record) {
        self.0.lock().unwrap().push(format!("{} {}", record.target(), record.args()));
    }

    fn flush(&self) {}
}

fn captured_logs() -> &'static Capture {
    static LOGGER: OnceLock<&'static Capture> = OnceLock::new();
    LOGGER.get_or_init(|| {
        let logger: &'static Capture = Box::leak(Box::new(Capture(Mutex::new(Vec::new()))));
        log::set_logger(logger).unwrap();
        log::set_max_level(log::LevelFilter::Trace);
        logger
    })
}

fn config(base_url: &str, timeout_secs: u64) -> LlmConfig {
    LlmConfig { base_url: base_url.into(), model: "stub-model".into(), timeout_secs, ..LlmConfig::default() }
}

fn user(content: &str) -> Vec<WireMessage> {
    vec![
        WireMessage { role: Role::System, content: "be brief".into() },
        WireMessage { role: Role::User, content: content.into() },
    ]
}

#[tokio::test]
async fn sends_the_wire_format_and_returns_the_reply() {
    let stub = spawn_stub_llm(StubMode::Echo).await;
    let backend = HttpChatBackend::new(config(&stub.base_url, 5)).unwrap();
    let reply = backend.complete(&user("ping")).await.unwrap();
    assert_eq!(reply, "ping");
    let req = stub.requests.lock().unwrap()[0].clone();
    assert_eq!(req["model"], "stub-model");
    assert_eq!(req["temperature"], 0.2);
    assert_eq!(req["messages"][0]["role"], "system");
    assert_eq!(req["messages"][1], serde_json::json!({"role": "user", "content": "ping"}));
}

#[tokio::test]
async fn http_statuses_map_to_errors() {
    let stub = spawn_stub_llm(StubMode::Fail(503)).await;
    let backend = HttpChatBackend::new(config(&stub.base_url, 5)).unwrap();
    assert_eq!(backend.complete(&user("x")).await, Err(LlmError::Status(503)));
    stub.set_mode(StubMode::Fail(429));
    let err = backend.complete(&user("x")).await.unwrap_err();
    assert_eq!(handle_failure(&err).code, "llm_busy");
}

#[tokio::test]
async fn timeouts_and_garbage_are_reported() {
    let app = Router::new()
        .route(
            "/slow/chat/completions",
            post(|| async {
                tokio::time::sleep(Duration::from_secs(5)).await;
                "late"
            }),
        )
        .route("/garbage/chat/completions", post(|| async { "<html>oops</html>" }))
        .route(
            "/empty/chat/completions",
            post(|| async { axum::Json(serde_json::json!({"choices": [{"message": {"content": "  "}}]})) }),
        );
    let addr = common::spawn_router(app).await;

    let slow = HttpChatBackend::new(config(&format!("http://{addr}/slow"), 1)).unwrap();
    assert_eq!(slow.complete(&user("x")).await, Err(LlmError::Timeout));
    let garbage = HttpChatBackend::new(config(&format!("http://{addr}/garbage"), 5)).unwrap();
    assert!(matches!(garbage.complete(&user("x")).await, Err(LlmError::Malformed(_))));
    // A blank reply is valid on the wire; the turn logic rejects it.
    let empty = HttpChatBackend::new(config(&format!("http://{addr}/empty"), 5)).unwrap();
    assert_eq!(empty.complete(&user("x")).await.unwrap().trim(), "");
    let mut session = ChatSession::new("s1", Timestamp(0));
    let bundle = build_prompt(&session, "x", &[], PromptOptions::default());
    let reply = generate_reply(&mut session, &bundle, &empty, &SystemClock).await;
    assert_eq!(reply.failure.unwrap().code, "llm_bad_response");

    let refused = HttpChatBackend::new(config("http://127.0.0.1:9", 2)).unwrap();
    let err = refused.complete(&user("x")).await.unwrap_err();
    assert!(matches!(err, LlmError::Transport(_) | LlmError::Timeout), "{err:?}");
}

#[tokio::test]
async fn api_key_never_leaks() {
    let logs = captured_logs();
    // Only this test reads the variable, so setting it here is race-free.
    std::env::set_var(CANARY_ENV, CANARY);
    let stub = spawn_stub_llm(StubMode::Echo).await;
    let backend = Arc::new(
        HttpChatBackend::new(LlmConfig { api_key_env: CANARY_ENV.into(), ..config(&stub.base_url, 5) }).unwrap(),
    );
    assert!(!format!("{backend:?}").contains(CANARY));

    let provider = common::synonym_embedder();
    let store = common::store_from_docs(provider.as_ref(), &common::SYNONYM_DOCS).await;
    let retriever = Arc::new(HybridRetriever::new(store, provider, RetrieverConfig::default()).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let engine = ChatEngine::new(
        retriever,
        backend,
        SessionStore::persistent(dir.path()).unwrap(),
        PromptOptions::default(),
        Arc::new(SystemClock),
    );

    let ok = engine.ask(None, "Where do I get a parking permit?").await.unwrap();
    assert!(ok.failure.is_none());
    stub.set_mode(StubMode::Fail(401));
    let failed = engine.ask(Some(&ok.session_id), "And the shuttle?").await.unwrap();
    assert!(failed.failure.is_some());

    assert_eq!(stub.auth_headers.lock().unwrap()[0], format!("Bearer {CANARY}"));
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(!text.contains(CANARY));
    }
    assert!(!serde_json::to_string(&ok).unwrap().contains(CANARY));
    assert!(!serde_json::to_string(&failed).unwrap().contains(CANARY));
    let logs = logs.0.lock().unwrap();
    assert!(logs.iter().all(|l| !l.contains(CANARY)));
}
