//! BM25 and vector search fused into one ranking, with the per-document
//! score breakdown and the effect of the fusion weight.
//!
//! cargo run --example hybrid_search

use std::sync::Arc;

use unirag::embed::{campus_synonyms, embed_texts, EmbeddingProvider, HashedEmbedder};
use unirag::retriever::{HybridRetriever, RetrieverConfig};
use unirag::vecstore::{RecordMetadata, VectorRecord, VectorStore};

const DOCS: [(&str, &str); 6] = [
    ("thesis", "Final year thesis submissions close in week twelve."),
    ("tuition", "Tuition is paid in three installments each semester."),
    ("advising", "Advising slots open before preregistration starts."),
    ("hours", "Each lecturer posts consultation hours online."),
    ("library", "Library regulations forbid food in the reading hall."),
    ("office", "Dr. Rahman sits in office 7G-12 on the seventh floor."),
];

pub async fn run() -> anyhow::Result<()> {
    let provider = Arc::new(HashedEmbedder::new(256, 0)?.with_synonyms(campus_synonyms()));
    let texts: Vec<String> = DOCS.iter().map(|d| d.1.to_owned()).collect();
    let vectors = embed_texts(provider.as_ref(), &texts).await?;
    let mut store = VectorStore::new(provider.fingerprint());
    store.upsert(
        DOCS.iter()
            .zip(vectors)
            .map(|((id, text), vector)| VectorRecord {
                id: id.to_string(),
                vector,
                document: text.to_string(),
                metadata: RecordMetadata {
                    table: "handbook".into(),
                    source_id: id.to_string(),
                    facet: "paragraph".into(),
                    chunk_index: 0,
                    rendered_at: 0,
                },
            })
            .collect(),
    )?;
    let retriever = HybridRetriever::new(store, provider, RetrieverConfig::default())?;

    // "professor" shares no word with any document; only the embedding links
    // it to "lecturer".
    for q in ["library food", "professor hours", "dissertation deadline"] {
        println!("{q:?}");
        println!("  {:<10} {:>8} {:>8} {:>8} {:>8}", "id", "bm25", "norm", "sim", "combined");
        for d in retriever.retrieve(q, 3).await? {
            let s = d.scores;
            println!(
                "  {:<10} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                d.id, s.bm25_raw, s.bm25_norm, s.similarity, s.combined
            );
        }
    }

    println!("fusion weight sweep for \"office hours\":");
    for lambda in [0.0, 0.5, 1.0] {
        let ids: Vec<String> =
            retriever.retrieve_with_lambda("office hours", 3, lambda).await?.into_iter().map(|d| d.id).collect();
        println!("  lambda {lambda:.1}: {ids:?}");
    }
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    run().await
}
