use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeLComponents {
    pub lcs: usize,
    pub precision: f64,
    pub recall: f64,
    pub beta: f64,
    pub f: f64,
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L of pre-tokenized text: P = LCS/|candidate|, R = LCS/|reference|.
pub fn rouge_l_tokens(candidate: &[String], reference: &[String], beta: f64) -> RougeLComponents {
    if candidate.is_empty() && reference.is_empty() {
        return RougeLComponents { lcs: 0, precision: 1.0, recall: 1.0, beta, f: 1.0 };
    }
    if candidate.is_empty() || reference.is_empty() {
        return RougeLComponents { lcs: 0, precision: 0.0, recall: 0.0, beta, f: 0.0 };
    }
    let lcs = lcs_len(candidate, reference);
    let precision = lcs as f64 / candidate.len() as f64;
    let recall = lcs as f64 / reference.len() as f64;
    let b2 = beta * beta;
    let denom = recall + b2 * precision;
    let f = if denom == 0.0 { 0.0 } else { (1.0 + b2) * recall * precision / denom };
    RougeLComponents { lcs, precision, recall, beta, f }
}
