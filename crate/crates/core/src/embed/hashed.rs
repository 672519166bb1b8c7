use std::collections::{BTreeMap, HashMap};

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector, ProviderFingerprint};
use crate::textprep::{analyze, lemmatize};

/// Number of basis directions mixed into each token vector.
const BASIS_PER_TOKEN: usize = 32;
const EMPTY_TEXT_TOKEN: &str = "\u{0}empty";

/// Deterministic, dependency-free embedder.
///
/// A text is embedded as the L2-normalized sum of its token vectors. Tokens
/// are analyzed with [`analyze`] and then mapped through an optional synonym
/// table, so synonyms share one vector. Each token vector is a signed mixture
/// of `BASIS_PER_TOKEN` basis directions chosen by a ChaCha stream seeded from
/// SHA-256 of (seed, token); identical input always produces identical output,
/// across processes and platforms.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dim: usize,
    seed: u64,
    /// lemma -> canonical lemma of its synonym group
    synonyms: HashMap<String, String>,
}

impl HashedEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if dim < 8 {
            return Err(EmbedError::Config(format!("hashed embedder needs dim >= 8, got {dim}")));
        }
        Ok(Self { dim, seed, synonyms: HashMap::new() })
    }

    /// Makes every word in `group` embed identically. The first word is the
    /// canonical form.
    pub fn with_synonym_group<S: AsRef<str>>(mut self, group: &[S]) -> Self {
        let mut lemmas = group.iter().map(|w| canonical_lemma(w.as_ref()));
        if let Some(head) = lemmas.next() {
            for lemma in lemmas {
                self.synonyms.insert(lemma, head.clone());
            }
        }
        self
    }

    pub fn with_synonyms<G, S>(self, groups: impl IntoIterator<Item = G>) -> Self
    where
        G: AsRef<[S]>,
        S: AsRef<str>,
    {
        groups.into_iter().fold(self, |acc, g| acc.with_synonym_group(g.as_ref()))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn resolve<'a>(&'a self, lemma: &'a str) -> &'a str {
        self.synonyms.get(lemma).map(String::as_str).unwrap_or(lemma)
    }

    fn token_vector(&self, token: &str, acc: &mut [f64]) {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);

        let scale = 1.0 / (BASIS_PER_TOKEN as f64).sqrt();
        for _ in 0..BASIS_PER_TOKEN {
            let axis = rng.random_range(0..self.dim);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            acc[axis] += sign * scale;
        }
    }

    /// Embeds one text. Always unit-norm.
    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut acc = vec![0.0; self.dim];
        let tokens = analyze(text);
        for token in &tokens {
            self.token_vector(self.resolve(token), &mut acc);
        }
        if acc.iter().all(|v| *v == 0.0) {
            // No tokens, or contributions cancelled exactly.
            acc.iter_mut().for_each(|v| *v = 0.0);
            self.token_vector(EMPTY_TEXT_TOKEN, &mut acc);
        }
        EmbeddingVector::new(acc)
            .and_then(EmbeddingVector::normalized)
            .expect("hashed embedding is finite and non-zero")
    }

    fn synonym_digest(&self) -> String {
        let sorted: BTreeMap<_, _> = self.synonyms.iter().collect();
        let mut hasher = Sha256::new();
        for (k, v) in sorted {
            hasher.update(k.as_bytes());
            hasher.update([0]);
            hasher.update(v.as_bytes());
            hasher.update([1]);
        }
        hex::encode(&hasher.finalize()[..4])
    }
}

fn canonical_lemma(word: &str) -> String {
    let tokens = crate::textprep::tokenize(word);
    match tokens.tokens() {
        [single] => lemmatize(single),
        _ => lemmatize(&word.to_lowercase()),
    }
}

#[async_trait]
impl EmbeddingProvider for HashedEmbedder {
    fn fingerprint(&self) -> ProviderFingerprint {
        ProviderFingerprint {
            name: "hashed".into(),
            model: format!("v1-seed{}-syn{}", self.seed, self.synonym_digest()),
            dim: self.dim,
        }
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Hashed embedder with the given dimension and seed 0.
pub fn test_embedder(dim: usize) -> Result<HashedEmbedder, EmbedError> {
    HashedEmbedder::new(dim, 0)
}

/// Synonym groups used by the bundled sample corpus and examples.
pub fn campus_synonyms() -> Vec<Vec<&'static str>> {
    vec![
        vec!["grading", "marks", "scores"],
        vec!["policy", "rules", "regulations"],
        vec!["thesis", "dissertation"],
        vec!["faculty", "professor", "teacher", "instructor", "lecturer"],
        vec!["course", "subject", "class"],
        vec!["prerequisite", "requirement"],
        vec!["room", "office", "cabin"],
        vec!["email", "mail", "contact"],
        vec!["schedule", "routine", "timetable"],
        vec!["fee", "tuition", "payment"],
        vec!["advising", "counselling", "guidance"],
        vec!["scholarship", "waiver", "grant"],
    ]
}
