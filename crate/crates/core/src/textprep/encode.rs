use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::TokenSeq;

/// Index shared by padding and out-of-vocabulary tokens.
pub const PAD_INDEX: u32 = 0;

/// Default sequence length used by [`pad`].
pub const DEFAULT_PAD_LENGTH: usize = 50;

/// Word → integer index map. Indices run `1..=len()` in first-seen order.
///
/// Integer encoding is a corpus-analysis utility; the retrieval path works on
/// raw text and embeddings and never consults a vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary over `corpus`, assigning indices in first-seen order.
    pub fn fit<'a>(corpus: impl IntoIterator<Item = &'a TokenSeq>) -> Self {
        let mut vocab = Self::new();
        for seq in corpus {
            for token in seq {
                vocab.insert(token);
            }
        }
        vocab
    }

    /// Adds `word` if absent and returns its index.
    pub fn insert(&mut self, word: &str) -> u32 {
        if let Some(&idx) = self.index.get(word) {
            return idx;
        }
        self.words.push(word.to_owned());
        let idx = self.words.len() as u32;
        self.index.insert(word.to_owned(), idx);
        idx
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: u32) -> Option<&str> {
        if idx == PAD_INDEX {
            return None;
        }
        self.words.get(idx as usize - 1).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32 + 1)).collect();
    }
}

/// Maps each token to its index; unknown tokens become [`PAD_INDEX`].
pub fn encode(seq: &TokenSeq, vocab: &Vocabulary) -> Vec<u32> {
    seq.iter().map(|t| vocab.get(t).unwrap_or(PAD_INDEX)).collect()
}

/// Right-pads with zeros or truncates from the tail to exactly `length`.
pub fn pad(ids: &[u32], length: usize) -> Vec<u32> {
    assert!(length >= 1, "pad length must be at least 1");
    let mut out: Vec<u32> = ids.iter().copied().take(length).collect();
    out.resize(length, PAD_INDEX);
    out
}
