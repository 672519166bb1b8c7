//! A grounded chat session: each turn retrieves context, builds a prompt
//! with recent history, and records the exchange.
//!
//! Uses the offline echo backend, so the "reply" is the prompt the model
//! would have received. Point `LlmConfig` at a real endpoint to get answers.
//!
//! cargo run --example rag_chat

use std::sync::Arc;

use unirag::chat::{ChatEngine, EchoBackend, PromptOptions, SessionStore};
use unirag::clock::{ManualClock, Timestamp};
use unirag::embed::{campus_synonyms, HashedEmbedder};
use unirag::ingest::RelationalStore;
use unirag::retriever::{HybridRetriever, RetrieverConfig};
use unirag::syncpipe::run_sync;
use unirag::syncpipe::sample::PREREQUISITES_TABLE_CSV;
use unirag::textprep::ChunkParams;

pub async fn run() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let clock = Arc::new(ManualClock::new(Timestamp(1_700_000_000)));
    let provider = Arc::new(HashedEmbedder::new(256, 0)?.with_synonyms(campus_synonyms()));

    let rel = RelationalStore::open_in_memory()?;
    rel.ingest_csv(PREREQUISITES_TABLE_CSV.as_bytes(), "prerequisites", &["Course"], clock.as_ref())?;
    let synced =
        run_sync(&rel, &dir.path().join("vectors"), provider.as_ref(), ChunkParams::default(), clock.as_ref()).await?;
    let store = synced.store.expect("first sync builds a store");

    let retriever = Arc::new(HybridRetriever::new(store, provider, RetrieverConfig::default())?);
    let options = PromptOptions { n_ctx: 2, history_turns: 4 };
    let engine = ChatEngine::new(
        retriever,
        Arc::new(EchoBackend),
        SessionStore::persistent(dir.path().join("sessions"))?,
        options,
        clock,
    );

    let first = engine.ask(None, "What do I need before taking CSE221?").await?;
    println!("session {}", first.session_id);
    println!("--- prompt seen by the model ---\n{}\n", first.reply);
    println!("sources: {:?}", first.sources.iter().map(|s| s.id.as_str()).collect::<Vec<_>>());

    let second = engine.ask(Some(&first.session_id), "And for CSE220?").await?;
    println!("second turn sources: {:?}", second.sources.iter().map(|s| s.id.as_str()).collect::<Vec<_>>());
    println!("messages in session: {}", second.history_len);
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    run().await
}
