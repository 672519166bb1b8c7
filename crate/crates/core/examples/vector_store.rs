//! Embeds a few documents, runs nearest-neighbour queries, and round-trips
//! the store through disk.
//!
//! cargo run --example vector_store

use unirag::embed::{campus_synonyms, embed_texts, EmbeddingProvider, HashedEmbedder};
use unirag::vecstore::{RecordMetadata, VectorRecord, VectorStore};

const DOCS: [&str; 4] = [
    "Final year thesis submissions close in week twelve.",
    "Tuition is paid in three installments each semester.",
    "Each lecturer posts consultation hours online.",
    "Parking permits are issued at the security desk.",
];

pub async fn run() -> anyhow::Result<()> {
    let embedder = HashedEmbedder::new(256, 0)?.with_synonyms(campus_synonyms());
    let texts: Vec<String> = DOCS.iter().map(|d| d.to_string()).collect();
    let vectors = embed_texts(&embedder, &texts).await?;

    let mut store = VectorStore::new(embedder.fingerprint());
    let records = texts
        .into_iter()
        .zip(vectors)
        .enumerate()
        .map(|(i, (document, vector))| VectorRecord {
            id: format!("handbook:{i}"),
            vector,
            document,
            metadata: RecordMetadata {
                table: "handbook".into(),
                source_id: i.to_string(),
                facet: "paragraph".into(),
                chunk_index: 0,
                rendered_at: 0,
            },
        })
        .collect();
    println!("upsert: {:?}", store.upsert(records)?);

    for q in ["dissertation deadline", "professor office hours", "fee schedule"] {
        let v = embedder.embed_one(q);
        let hits = store.query(v.values(), 2)?;
        println!("{q:?}");
        for (id, distance) in hits {
            println!("  {distance:.4}  {}", store.get(&id).map_or("", |r| r.document.as_str()));
        }
    }

    let dir = tempfile::tempdir()?;
    let manifest = store.persist(dir.path())?;
    let loaded = VectorStore::load(dir.path(), Some(&embedder.fingerprint()))?;
    println!("persisted {} records ({:?}); reloaded {}", manifest.record_count, manifest.fingerprint, loaded.len());
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    run().await
}
