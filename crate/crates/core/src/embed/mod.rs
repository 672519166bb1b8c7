//! Embedding providers and vector arithmetic.
//!
//! Two providers ship: [`HashedEmbedder`], a deterministic offline stand-in,
//! and [`HttpEmbedder`], a client for a JSON embedding endpoint. Both sit
//! behind [`EmbeddingProvider`]; [`embed_texts`] is the entry point that
//! enforces the shared postconditions (one unit vector per input, in order).

mod hashed;
mod http;
mod vector;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hashed::{campus_synonyms, test_embedder, HashedEmbedder};
pub use http::{HttpEmbedder, HttpEmbedderConfig};
pub use vector::{cosine, dot, l2_norm, EmbeddingVector};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("nothing to embed")]
    EmptyInput,
    #[error("provider {provider} failed on batch {batch_index}: {message}")]
    Remote { provider: String, batch_index: usize, message: String, retryable: bool },
    #[error("provider {provider} returned {got} vectors for {expected} texts")]
    CountMismatch { provider: String, expected: usize, got: usize },
    #[error("provider {provider} returned a {got}-dimensional vector, expected {expected}")]
    DimMismatch { provider: String, expected: usize, got: usize },
    #[error("invalid vector: {0}")]
    InvalidVector(String),
    #[error("embedding configuration: {0}")]
    Config(String),
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Remote { retryable: true, .. })
    }
}

/// Identifies which provider (and version) produced a set of vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProviderFingerprint {
    pub name: String,
    pub model: String,
    pub dim: usize,
}

impl fmt::Display for ProviderFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.name, self.model, self.dim)
    }
}

#[async_trait]
pub trait EmbeddingProvider: Send + Sync {
    fn fingerprint(&self) -> ProviderFingerprint;

    fn name(&self) -> String {
        self.fingerprint().name
    }

    fn dim(&self) -> usize {
        self.fingerprint().dim
    }

    /// Raw provider call. Callers should normally go through [`embed_texts`].
    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

#[async_trait]
impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<P> {
    fn fingerprint(&self) -> ProviderFingerprint {
        (**self).fingerprint()
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts).await
    }
}

/// Embeds `texts`, returning one unit-norm vector per text in input order.
pub async fn embed_texts<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    texts: &[String],
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    let fp = provider.fingerprint();
    let vectors = provider.embed_batch(texts).await?;
    if vectors.len() != texts.len() {
        return Err(EmbedError::CountMismatch { provider: fp.name, expected: texts.len(), got: vectors.len() });
    }
    vectors
        .into_iter()
        .map(|v| {
            if v.dim() != fp.dim {
                return Err(EmbedError::DimMismatch { provider: fp.name.clone(), expected: fp.dim, got: v.dim() });
            }
            v.normalized()
        })
        .collect()
}

/// Counts provider traffic. Used by the ingestion benchmark.
#[derive(Debug)]
pub struct CountingProvider<P> {
    inner: P,
    texts: AtomicUsize,
    batches: AtomicUsize,
}

impl<P> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, texts: AtomicUsize::new(0), batches: AtomicUsize::new(0) }
    }

    pub fn texts_embedded(&self) -> usize {
        self.texts.load(Ordering::SeqCst)
    }

    pub fn batches(&self) -> usize {
        self.batches.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.texts.store(0, Ordering::SeqCst);
        self.batches.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

#[async_trait]
impl<P: EmbeddingProvider> EmbeddingProvider for CountingProvider<P> {
    fn fingerprint(&self) -> ProviderFingerprint {
        self.inner.fingerprint()
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        self.batches.fetch_add(1, Ordering::SeqCst);
        self.texts.fetch_add(texts.len(), Ordering::SeqCst);
        self.inner.embed_batch(texts).await
    }
}
