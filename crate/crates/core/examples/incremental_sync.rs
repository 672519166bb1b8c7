//! Syncs the relational store into the vector store, then shows that an
//! edited row re-embeds only its own documents and an idle run embeds nothing.
//!
//! cargo run --example incremental_sync

use unirag::clock::{ManualClock, Timestamp};
use unirag::embed::{campus_synonyms, CountingProvider, HashedEmbedder};
use unirag::ingest::RelationalStore;
use unirag::syncpipe::run_sync;
use unirag::syncpipe::sample::PREREQUISITES_TABLE_CSV;
use unirag::textprep::ChunkParams;

pub async fn run() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let rel = RelationalStore::open(&dir.path().join("relational.db"))?;
    let store_dir = dir.path().join("vectors");
    let provider = CountingProvider::new(HashedEmbedder::new(256, 0)?.with_synonyms(campus_synonyms()));
    let clock = ManualClock::new(Timestamp(1_700_000_000));

    let edited = PREREQUISITES_TABLE_CSV.replace("CSE330,MAT216 (HP)", "CSE330,MAT215 (HP)");
    let steps = [
        ("fresh", PREREQUISITES_TABLE_CSV.to_owned()),
        ("one row edited", edited.clone()),
        ("nothing changed", edited),
    ];
    for (label, csv) in steps {
        provider.reset();
        let ingested = rel.ingest_csv(csv.as_bytes(), "prerequisites", &["Course"], &clock)?;
        let outcome = run_sync(&rel, &store_dir, &provider, ChunkParams::default(), &clock).await?;
        let s = &outcome.stats;
        println!(
            "{label:<16} ingest {ingested:?}; rows selected {}, docs embedded {}, embed calls {}, store {}",
            s.rows_selected,
            s.docs_embedded,
            provider.texts_embedded(),
            outcome.store.map_or("untouched".to_owned(), |st| format!("{} records", st.len())),
        );
        clock.advance(60);
    }
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    run().await
}
