use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::RetrieveError;

/// A document found by at least one of the two searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    /// 0 when only the vector search found it.
    pub bm25_raw: f64,
    /// `None` when only BM25 found it.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub bm25_raw: f64,
    pub bm25_norm: f64,
    pub distance: Option<f64>,
    pub similarity: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedCandidate {
    pub id: String,
    #[serde(flatten)]
    pub scores: ScoreBreakdown,
}

/// Union of the two top-k lists keyed by id, BM25 hits first.
pub fn merge_candidates(bm25: &[(String, f64)], vector: &[(String, f64)]) -> Vec<Candidate> {
    let mut merged: IndexMap<&str, Candidate> = IndexMap::with_capacity(bm25.len() + vector.len());
    for (id, score) in bm25 {
        merged.insert(id, Candidate { id: id.clone(), bm25_raw: *score, distance: None });
    }
    for (id, distance) in vector {
        merged.entry(id).or_insert_with(|| Candidate { id: id.clone(), bm25_raw: 0.0, distance: None }).distance =
            Some(*distance);
    }
    merged.into_values().collect()
}

/// `1 / (1 + distance)`, or 0 when the vector search did not return the doc.
pub fn similarity(distance: Option<f64>) -> f64 {
    distance.map_or(0.0, |d| 1.0 / (1.0 + d))
}

pub fn check_lambda(lambda: f64) -> Result<f64, RetrieveError> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(lambda)
    } else {
        Err(RetrieveError::InvalidLambda(lambda))
    }
}

/// Scores candidates by `λ·bm25_norm + (1 − λ)·similarity` and sorts them
/// best first, ties by id.
///
/// `bm25_norm` divides by the largest raw BM25 score among the candidates;
/// if every candidate scores 0 lexically, every norm is 0.
pub fn fuse(candidates: &[Candidate], lambda: f64) -> Result<Vec<FusedCandidate>, RetrieveError> {
    let lambda = check_lambda(lambda)?;
    let max = candidates.iter().map(|c| c.bm25_raw).fold(0.0, f64::max);
    let mut fused: Vec<FusedCandidate> = candidates
        .iter()
        .map(|c| {
            let bm25_norm = if max > 0.0 { c.bm25_raw / max } else { 0.0 };
            let similarity = similarity(c.distance);
            FusedCandidate {
                id: c.id.clone(),
                scores: ScoreBreakdown {
                    bm25_raw: c.bm25_raw,
                    bm25_norm,
                    distance: c.distance,
                    similarity,
                    combined: lambda * bm25_norm + (1.0 - lambda) * similarity,
                },
            }
        })
        .collect();
    fused.sort_by(|a, b| b.scores.combined.total_cmp(&a.scores.combined).then_with(|| a.id.cmp(&b.id)));
    Ok(fused)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(items: &[(&str, f64)]) -> Vec<(String, f64)> {
        items.iter().map(|(i, s)| (i.to_string(), *s)).collect()
    }

    #[test]
    fn merge_rules() {
        let merged = merge_candidates(&list(&[("a", 2.0), ("b", 1.0)]), &list(&[("b", 0.3), ("c", 0.5)]));
        assert_eq!(merged.len(), 3);
        assert_eq!(merged[0], Candidate { id: "a".into(), bm25_raw: 2.0, distance: None });
        assert_eq!(merged[1], Candidate { id: "b".into(), bm25_raw: 1.0, distance: Some(0.3) });
        assert_eq!(merged[2], Candidate { id: "c".into(), bm25_raw: 0.0, distance: Some(0.5) });
    }

    #[test]
    fn worked_fusion() {
        let c = vec![
            Candidate { id: "A".into(), bm25_raw: 2.0, distance: Some(0.0) },
            Candidate { id: "B".into(), bm25_raw: 1.0, distance: Some(1.0) },
        ];
        let f = fuse(&c, 0.5).unwrap();
        assert_eq!(f[0].id, "A");
        assert_eq!(f[0].scores.combined, 1.0);
        assert_eq!(f[1].scores.combined, 0.5);
    }

    #[test]
    fn bm25_only_doc_gets_half() {
        let c = vec![Candidate { id: "A".into(), bm25_raw: 3.0, distance: None }];
        let f = fuse(&c, 0.5).unwrap();
        assert_eq!(f[0].scores.similarity, 0.0);
        assert_eq!(f[0].scores.combined, 0.5);
    }

    #[test]
    fn all_zero_bm25_and_bad_lambda() {
        let c = vec![Candidate { id: "A".into(), bm25_raw: 0.0, distance: Some(1.0) }];
        assert_eq!(fuse(&c, 0.5).unwrap()[0].scores.bm25_norm, 0.0);
        assert!(fuse(&c, 1.5).is_err());
        assert!(fuse(&c, f64::NAN).is_err());
    }
}
