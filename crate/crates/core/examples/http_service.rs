//! Runs the HTTP service on a loopback port and drives it with a client:
//! upload a table, sync, search, chat, and read the health report.
//!
//! The chat backend is the offline echo backend and all data lives in a
//! temporary directory.
//!
//! cargo run --example http_service

use std::sync::Arc;

use serde_json::{json, Value};

use unirag::service::{router, AppConfig, AppState, LlmKind};
use unirag::syncpipe::sample::PREREQUISITES_TABLE_CSV;

pub async fn run() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut config = AppConfig::default();
    config.storage.data_dir = dir.path().to_path_buf();
    config.llm.provider = LlmKind::Echo;
    let state = Arc::new(AppState::open(config)?);

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, router(state)).await });
    let http = reqwest::Client::new();

    let r: Value = http
        .post(format!("{base}/ingest/csv?table=prerequisites&key=Course"))
        .body(PREREQUISITES_TABLE_CSV)
        .send()
        .await?
        .json()
        .await?;
    println!("POST /ingest/csv -> {r}");
    let r: Value = http.post(format!("{base}/sync")).send().await?.json().await?;
    println!("POST /sync -> {r}");

    let r: Value = http.get(format!("{base}/search?q=CSE221&k=2")).send().await?.json().await?;
    println!("GET /search -> {}", serde_json::to_string_pretty(&r)?);

    let r: Value = http
        .post(format!("{base}/chat"))
        .json(&json!({"message": "Which course comes before CSE221?"}))
        .send()
        .await?
        .json()
        .await?;
    println!("POST /chat -> session {} with {} sources", r["session_id"], r["sources"].as_array().map_or(0, Vec::len));

    let r = http.get(format!("{base}/search?q=")).send().await?;
    println!("GET /search?q= -> {} {}", r.status(), r.text().await?);

    let r: Value = http.get(format!("{base}/healthz")).send().await?.json().await?;
    println!("GET /healthz -> {r}");
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    run().await
}
