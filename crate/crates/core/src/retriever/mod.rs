//! Hybrid retrieval: BM25 and vector top-k lists merged, max-normalized and
//! fused by a weighted combined score.

mod bm25;
mod fusion;

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{embed_texts, EmbedError, EmbeddingProvider};
use crate::vecstore::{RecordMetadata, StoreError, VectorStore};

pub use bm25::{Bm25Index, Bm25Params};
pub use fusion::{check_lambda, fuse, merge_candidates, similarity, Candidate, FusedCandidate, ScoreBreakdown};

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("lambda must be within [0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("embedding the query failed: {0}")]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrieverConfig {
    pub lambda: f64,
    /// BM25 candidates per query.
    pub bm25_k: usize,
    /// Vector candidates per query.
    pub vector_k: usize,
    pub bm25: Bm25Params,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        Self { lambda: 0.5, bm25_k: 10, vector_k: 10, bm25: Bm25Params::default() }
    }
}

/// A retrieval hit with its document and every score component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub id: String,
    pub document: String,
    pub metadata: RecordMetadata,
    #[serde(flatten)]
    pub scores: ScoreBreakdown,
}

/// A vector store together with a BM25 index over the same records.
#[derive(Debug)]
pub struct IndexSnapshot {
    pub store: VectorStore,
    pub bm25: Bm25Index,
}

impl IndexSnapshot {
    pub fn build(store: VectorStore, params: Bm25Params) -> Self {
        let bm25 = Bm25Index::build(store.records().iter().map(|r| (r.id.as_str(), r.document.as_str())), params);
        Self { store, bm25 }
    }
}

/// Hybrid retriever over an immutable index snapshot.
///
/// Queries clone an `Arc` to the current snapshot and never block each
/// other; [`HybridRetriever::replace_store`] builds a new snapshot and swaps
/// it in atomically.
pub struct HybridRetriever {
    snapshot: RwLock<Arc<IndexSnapshot>>,
    provider: Arc<dyn EmbeddingProvider>,
    config: RetrieverConfig,
}

impl std::fmt::Debug for HybridRetriever {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HybridRetriever")
            .field("records", &self.snapshot().store.len())
            .field("provider", &self.provider.fingerprint())
            .field("config", &self.config)
            .finish()
    }
}

impl HybridRetriever {
    /// Fails if `store` was built by a different provider than `provider`.
    pub fn new(
        store: VectorStore,
        provider: Arc<dyn EmbeddingProvider>,
        config: RetrieverConfig,
    ) -> Result<Self, RetrieveError> {
        check_lambda(config.lambda)?;
        if config.bm25_k == 0 || config.vector_k == 0 {
            return Err(RetrieveError::ZeroK);
        }
        check_fingerprint(&store, provider.as_ref())?;
        Ok(Self { snapshot: RwLock::new(Arc::new(IndexSnapshot::build(store, config.bm25))), provider, config })
    }

    pub fn config(&self) -> &RetrieverConfig {
        &self.config
    }

    pub fn snapshot(&self) -> Arc<IndexSnapshot> {
        self.snapshot.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn replace_store(&self, store: VectorStore) -> Result<(), RetrieveError> {
        check_fingerprint(&store, self.provider.as_ref())?;
        let next = Arc::new(IndexSnapshot::build(store, self.config.bm25));
        *self.snapshot.write().unwrap_or_else(|p| p.into_inner()) = next;
        Ok(())
    }

    pub async fn retrieve(&self, query: &str, k: usize) -> Result<Vec<ScoredDoc>, RetrieveError> {
        self.retrieve_with_lambda(query, k, self.config.lambda).await
    }

    /// BM25 top-k and vector top-k, merged, fused with `lambda`, cut to `k`.
    pub async fn retrieve_with_lambda(
        &self,
        query: &str,
        k: usize,
        lambda: f64,
    ) -> Result<Vec<ScoredDoc>, RetrieveError> {
        if k == 0 {
            return Err(RetrieveError::ZeroK);
        }
        check_lambda(lambda)?;
        let snap = self.snapshot();
        if snap.store.is_empty() {
            return Ok(Vec::new());
        }

        let lexical = snap.bm25.top_k(query, self.config.bm25_k);
        let qv = embed_texts(self.provider.as_ref(), &[query.to_owned()]).await?;
        let semantic = snap.store.query(qv[0].values(), self.config.vector_k)?;

        let fused = fuse(&merge_candidates(&lexical, &semantic), lambda)?;
        Ok(fused
            .into_iter()
            .take(k)
            .filter_map(|f| {
                let rec = snap.store.get(&f.id)?;
                Some(ScoredDoc {
                    id: f.id,
                    document: rec.document.clone(),
                    metadata: rec.metadata.clone(),
                    scores: f.scores,
                })
            })
            .collect())
    }
}

fn check_fingerprint(store: &VectorStore, provider: &dyn EmbeddingProvider) -> Result<(), StoreError> {
    let configured = provider.fingerprint();
    if *store.fingerprint() != configured {
        return Err(StoreError::FingerprintMismatch { stored: store.fingerprint().clone(), configured });
    }
    Ok(())
}
