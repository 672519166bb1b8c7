use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BleuOptions {
    pub max_n: usize,
    /// Defaults to uniform `1/max_n` when empty.
    pub weights: Vec<f64>,
    /// Add-one smoothing of the n ≥ 2 precisions. Off by default, so any
    /// zero precision makes the score 0.
    pub smoothing: bool,
}

impl Default for BleuOptions {
    fn default() -> Self {
        Self { max_n: 4, weights: Vec::new(), smoothing: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuComponents {
    /// Modified n-gram precisions p_1..p_N.
    pub precisions: Vec<f64>,
    /// Clipped matches per order.
    pub matches: Vec<usize>,
    /// Candidate n-grams per order.
    pub totals: Vec<usize>,
    pub weights: Vec<f64>,
    pub candidate_len: usize,
    pub reference_len: usize,
    pub brevity_penalty: f64,
    pub bleu: f64,
}

fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU of pre-tokenized text.
pub fn bleu_tokens(candidate: &[String], references: &[Vec<String>], options: &BleuOptions) -> BleuComponents {
    let max_n = options.max_n.max(1);
    let weights = if options.weights.is_empty() {
        vec![1.0 / max_n as f64; max_n]
    } else {
        assert_eq!(options.weights.len(), max_n, "one weight per n-gram order");
        options.weights.clone()
    };
    let c = candidate.len();
    // Closest reference length; ties go to the shorter reference.
    let r = references.iter().map(Vec::len).min_by_key(|&len| (len.abs_diff(c), len)).unwrap_or(0);

    let mut precisions = Vec::with_capacity(max_n);
    let mut matches = Vec::with_capacity(max_n);
    let mut totals = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for reference in references {
            for (g, k) in ngram_counts(reference, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(k);
            }
        }
        let clipped: usize = cand.iter().map(|(g, &k)| k.min(max_ref.get(g).copied().unwrap_or(0))).sum();
        let total = c.saturating_sub(n - 1);
        let p = if options.smoothing && n > 1 {
            (clipped as f64 + 1.0) / (total as f64 + 1.0)
        } else if total == 0 {
            0.0
        } else {
            clipped as f64 / total as f64
        };
        precisions.push(p);
        matches.push(clipped);
        totals.push(total);
    }

    let brevity_penalty = if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    let bleu = if c == 0 || precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let log_sum: f64 = weights.iter().zip(&precisions).map(|(w, p)| w * p.ln()).sum();
        brevity_penalty * log_sum.exp()
    };
    BleuComponents { precisions, matches, totals, weights, candidate_len: c, reference_len: r, brevity_penalty, bleu }
}
