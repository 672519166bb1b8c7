//! Fetches a page twice, changes it, and fetches again. Identical content
//! keeps one version; changed content adds a new version and keeps the old.
//!
//! The page is served in-process, so no network access is needed.
//!
//! cargo run --example web_snapshots

use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::response::Html;
use axum::routing::get;
use axum::Router;

use unirag::clock::{ManualClock, Timestamp};
use unirag::ingest::{extract_text, fetch_urls, FetchOptions, RelationalStore};

const PAGE_V1: &str = "<html><head><script>track()</script></head><body>\
<nav>Home | News</nav><h1>Library hours</h1><p>Open 8am to 8pm on weekdays.</p></body></html>";
const PAGE_V2: &str = "<html><body><h1>Library hours</h1><p>Open 8am to 10pm during exams.</p></body></html>";

pub async fn run() -> anyhow::Result<()> {
    let page = Arc::new(Mutex::new(PAGE_V1.to_owned()));
    let app = Router::new()
        .route("/library", get(|State(p): State<Arc<Mutex<String>>>| async move { Html(p.lock().unwrap().clone()) }))
        .with_state(page.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let url = format!("http://{}/library", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, app).await });

    println!("extracted: {:?}", extract_text(PAGE_V1.as_bytes()));

    let store = RelationalStore::open_in_memory()?;
    let clock = ManualClock::new(Timestamp(1_700_000_000));
    let list = format!("# pages to watch\n{url}\n");
    for round in 1..=3 {
        if round == 3 {
            *page.lock().unwrap() = PAGE_V2.to_owned();
        }
        for report in fetch_urls(&store, &list, &FetchOptions::default(), &clock).await {
            println!("fetch {round}: {}", serde_json::to_string(&report)?);
        }
        clock.advance(60);
    }

    for v in store.snapshot_versions(&url)? {
        println!("v{} at {} hash {}… {:?}", v.version, v.fetched_at.0, &v.content_hash[..12], v.text);
    }
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    run().await
}
