use serde::{Deserialize, Serialize};

use crate::textprep::lemmatize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeteorParams {
    pub alpha: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl Default for MeteorParams {
    fn default() -> Self {
        Self { alpha: 0.9, gamma: 0.5, theta: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeteorComponents {
    pub matches: usize,
    pub exact_matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_mean: f64,
    pub penalty: f64,
    pub params: MeteorParams,
    pub meteor: f64,
    /// (candidate index, reference index) pairs, by candidate index.
    pub alignment: Vec<(usize, usize)>,
}

/// Aligns candidate tokens to reference tokens whose key is equal, each
/// token used at most once. Among equal keys the reference position right
/// after the previous match is preferred, so runs stay contiguous.
fn align_stage(
    cand: &[String],
    refs: &[String],
    cand_used: &mut [bool],
    ref_used: &mut [bool],
    alignment: &mut Vec<(usize, usize)>,
    key: impl Fn(&str) -> String,
) {
    let ref_keys: Vec<String> = refs.iter().map(|t| key(t)).collect();
    let mut prev: Option<usize> = None;
    for (i, tok) in cand.iter().enumerate() {
        if cand_used[i] {
            prev = alignment.iter().find(|&&(c, _)| c == i).map(|&(_, r)| r);
            continue;
        }
        let k = key(tok);
        let free = |j: usize| !ref_used[j] && ref_keys[j] == k;
        let next = prev.map(|p| p + 1).filter(|&j| j < refs.len() && free(j));
        let chosen = next.or_else(|| (0..refs.len()).find(|&j| free(j)));
        if let Some(j) = chosen {
            cand_used[i] = true;
            ref_used[j] = true;
            alignment.push((i, j));
            prev = Some(j);
        } else {
            prev = None;
        }
    }
}

/// Number of maximal runs that are contiguous in both candidate and
/// reference order.
pub fn count_chunks(alignment: &[(usize, usize)]) -> usize {
    let mut sorted = alignment.to_vec();
    sorted.sort_unstable();
    let mut chunks = 0;
    let mut last: Option<(usize, usize)> = None;
    for &(c, r) in &sorted {
        match last {
            Some((lc, lr)) if c == lc + 1 && r == lr + 1 => {}
            _ => chunks += 1,
        }
        last = Some((c, r));
    }
    chunks
}

/// METEOR with an exact stage followed by a lemma stage.
pub fn meteor_tokens(candidate: &[String], reference: &[String], params: MeteorParams) -> MeteorComponents {
    let mut cand_used = vec![false; candidate.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut alignment = Vec::new();
    align_stage(candidate, reference, &mut cand_used, &mut ref_used, &mut alignment, str::to_owned);
    let exact_matches = alignment.len();
    align_stage(candidate, reference, &mut cand_used, &mut ref_used, &mut alignment, lemmatize);
    alignment.sort_unstable();

    let m = alignment.len();
    let MeteorParams { alpha, gamma, theta } = params;
    if m == 0 {
        return MeteorComponents {
            matches: 0,
            exact_matches: 0,
            chunks: 0,
            precision: 0.0,
            recall: 0.0,
            f_mean: 0.0,
            penalty: 0.0,
            params,
            meteor: 0.0,
            alignment,
        };
    }
    let chunks = count_chunks(&alignment);
    let precision = m as f64 / candidate.len() as f64;
    let recall = m as f64 / reference.len() as f64;
    let f_mean = precision * recall / (alpha * precision + (1.0 - alpha) * recall);
    let penalty = gamma * (chunks as f64 / m as f64).powf(theta);
    MeteorComponents {
        matches: m,
        exact_matches,
        chunks,
        precision,
        recall,
        f_mean,
        penalty,
        params,
        meteor: f_mean * (1.0 - penalty),
        alignment,
    }
}
