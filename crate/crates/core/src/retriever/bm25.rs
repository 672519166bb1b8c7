use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::textprep::analyze;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

/// Okapi BM25 inverted index over analyzed (tokenized + lemmatized) text.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    ids: Vec<String>,
    doc_len: Vec<usize>,
    /// term → (doc index, term frequency), doc indices ascending.
    postings: HashMap<String, Vec<(usize, usize)>>,
    avgdl: f64,
}

impl Bm25Index {
    pub fn build<I, S, T>(docs: I, params: Bm25Params) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut ids = Vec::new();
        let mut doc_len = Vec::new();
        let mut postings: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        for (i, (id, text)) in docs.into_iter().enumerate() {
            let tokens = analyze(text.as_ref());
            let mut tf: HashMap<&str, usize> = HashMap::new();
            for t in tokens.iter() {
                *tf.entry(t).or_default() += 1;
            }
            for (t, f) in tf {
                postings.entry(t.to_owned()).or_default().push((i, f));
            }
            ids.push(id.into());
            doc_len.push(tokens.len());
        }
        let avgdl = if ids.is_empty() { 0.0 } else { doc_len.iter().sum::<usize>() as f64 / ids.len() as f64 };
        Self { params, ids, doc_len, postings, avgdl }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    /// Document frequency of an analyzed term.
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn doc_len(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|d| d == id).map(|i| self.doc_len[i])
    }

    /// Frequency of an analyzed term in document `id`.
    pub fn tf(&self, id: &str, term: &str) -> usize {
        let Some(doc) = self.ids.iter().position(|d| d == id) else {
            return 0;
        };
        self.postings.get(term).and_then(|p| p.iter().find(|(d, _)| *d == doc)).map_or(0, |&(_, f)| f)
    }

    /// `ln((N − df + 0.5) / (df + 0.5) + 1)`
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.ids.len() as f64;
        let df = self.df(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Scores every document containing at least one query term. Each query
    /// token contributes once per occurrence in the query.
    pub fn scores(&self, query: &str) -> Vec<(usize, f64)> {
        let Bm25Params { k1, b } = self.params;
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for term in analyze(query).iter() {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for &(doc, f) in list {
                let f = f as f64;
                let norm = 1.0 - b + b * self.doc_len[doc] as f64 / self.avgdl;
                *acc.entry(doc).or_default() += idf * f * (k1 + 1.0) / (f + k1 * norm);
            }
        }
        acc.into_iter().filter(|&(_, s)| s > 0.0).collect()
    }

    /// The `k` best-scoring documents, descending, ties by id. Documents
    /// scoring zero are left out.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        let mut scored: Vec<(&str, f64)> =
            self.scores(query).into_iter().map(|(d, s)| (self.ids[d].as_str(), s)).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        scored.truncate(k);
        scored.into_iter().map(|(id, s)| (id.to_owned(), s)).collect()
    }
}
