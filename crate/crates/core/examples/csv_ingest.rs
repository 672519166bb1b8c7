//! Loads a CSV table keyed by a natural key, reloads it with one edited row,
//! and renders the stored rows into retrievable documents.
//!
//! cargo run --example csv_ingest

use unirag::clock::{Clock, ManualClock, Timestamp};
use unirag::ingest::RelationalStore;
use unirag::syncpipe::render_row;
use unirag::syncpipe::sample::PREREQUISITES_TABLE_CSV;
use unirag::textprep::ChunkParams;

pub fn run() -> anyhow::Result<()> {
    let store = RelationalStore::open_in_memory()?;
    let clock = ManualClock::new(Timestamp(1_700_000_000));

    let first = store.ingest_csv(PREREQUISITES_TABLE_CSV.as_bytes(), "prerequisites", &["Course"], &clock)?;
    println!("first load:  {first:?}");
    let again = store.ingest_csv(PREREQUISITES_TABLE_CSV.as_bytes(), "prerequisites", &["Course"], &clock)?;
    println!("same file:   {again:?}");

    let edited_at = clock.advance(3600);
    let edited = PREREQUISITES_TABLE_CSV.replace("CSE250,PHY112 (SP),None", "CSE250,PHY111 (SP),None");
    let third = store.ingest_csv(edited.as_bytes(), "prerequisites", &["Course"], &clock)?;
    println!("one edit:    {third:?}");

    let changed = store.rows_since("prerequisites", edited_at)?;
    println!("rows stamped by the edit: {}", changed.len());
    for row in &changed {
        println!("  {:?}", row.fields);
        for doc in render_row(row, ChunkParams::default(), clock.now().0) {
            println!("  -> [{}] {}", doc.metadata.facet, doc.text);
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run()
}
