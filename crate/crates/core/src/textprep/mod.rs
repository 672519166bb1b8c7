//! Text normalization, tokenization, lemmatization, integer encoding and
//! recursive character chunking. Everything here is pure.

mod encode;
mod lemma;
mod normalize;
mod split;

pub use encode::{encode, pad, Vocabulary, DEFAULT_PAD_LENGTH, PAD_INDEX};
pub use lemma::{lemmatize, Lemmatizer, SuffixLemmatizer};
pub use normalize::{normalize, tokenize, TokenSeq};
pub use split::{split_recursive, Chunk, ChunkParams, ChunkParamsError, DEFAULT_CHUNK_OVERLAP, DEFAULT_CHUNK_SIZE};

/// Tokenizes and lemmatizes; the analysis chain shared by BM25 and the
/// deterministic embedder.
pub fn analyze(text: &str) -> TokenSeq {
    tokenize(text).map_tokens(lemmatize)
}
