//! Answer-quality metrics: BLEU, ROUGE-L, METEOR and an embedding-based
//! similarity score, plus corpus-level reporting.
//!
//! Every metric works on the same tokens: [`crate::textprep::tokenize`]
//! output, without lemmatization. METEOR applies the lemmatizer itself in its
//! second matching stage.

mod bleu;
mod meteor;
mod rouge;

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{bleu_tokens, BleuComponents, BleuOptions};
pub use meteor::{count_chunks, meteor_tokens, MeteorComponents, MeteorParams};
pub use rouge::{lcs_len, rouge_l_tokens, RougeLComponents};

use crate::embed::{dot, embed_texts, EmbedError, EmbeddingProvider};
use crate::textprep::tokenize;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}:{line}: {message}")]
    BadLine { path: String, line: usize, message: String },
    #[error("prediction {0:?} has no reference")]
    MissingReference(String),
    #[error("prediction id {0:?} appears twice")]
    DuplicatePrediction(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn tokens(text: &str) -> Vec<String> {
    tokenize(text).tokens().to_vec()
}

pub fn bleu(candidate: &str, references: &[&str]) -> BleuComponents {
    bleu_with(candidate, references, &BleuOptions::default())
}

pub fn bleu_with(candidate: &str, references: &[&str], options: &BleuOptions) -> BleuComponents {
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokens(r)).collect();
    bleu_tokens(&tokens(candidate), &refs, options)
}

/// ROUGE-L F-measure components with β = 1.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeLComponents {
    rouge_l_tokens(&tokens(candidate), &tokens(reference), 1.0)
}

pub fn meteor(candidate: &str, reference: &str) -> MeteorComponents {
    meteor_tokens(&tokens(candidate), &tokens(reference), MeteorParams::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedScoreComponents {
    /// Best clamped cosine of each candidate token against the reference.
    pub candidate_max: Vec<f64>,
    /// Best clamped cosine of each reference token against the candidate.
    pub reference_max: Vec<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Token-level embedding similarity.
///
/// Each token is embedded on its own. Precision averages, over candidate
/// tokens, the best cosine against any reference token; recall does the same
/// from the reference side. Cosines below zero count as zero so all scores
/// stay in [0, 1].
pub async fn embed_score<P: EmbeddingProvider + ?Sized>(
    candidate: &str,
    reference: &str,
    provider: &P,
) -> Result<EmbedScoreComponents, EmbedError> {
    let cand = tokens(candidate);
    let refs = tokens(reference);
    if cand.is_empty() || refs.is_empty() {
        let both = cand.is_empty() && refs.is_empty();
        let v = if both { 1.0 } else { 0.0 };
        return Ok(EmbedScoreComponents {
            candidate_max: vec![0.0; cand.len()],
            reference_max: vec![0.0; refs.len()],
            precision: v,
            recall: v,
            f1: v,
        });
    }
    let mut unique: Vec<String> = cand.iter().chain(&refs).cloned().collect();
    unique.sort();
    unique.dedup();
    let vectors = embed_texts(provider, &unique).await?;
    let index: HashMap<&str, &[f64]> =
        unique.iter().map(String::as_str).zip(vectors.iter().map(|v| v.values())).collect();

    let best = |from: &[String], to: &[String]| -> Vec<f64> {
        from.iter()
            .map(|a| {
                to.iter()
                    .map(|b| dot(index[a.as_str()], index[b.as_str()]))
                    .fold(f64::NEG_INFINITY, f64::max)
                    .clamp(0.0, 1.0)
            })
            .collect()
    };
    let candidate_max = best(&cand, &refs);
    let reference_max = best(&refs, &cand);
    let precision = mean(&candidate_max);
    let recall = mean(&reference_max);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(EmbedScoreComponents { candidate_max, reference_max, precision, recall, f1 })
}

/// One candidate with its references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub id: String,
    pub bleu: BleuComponents,
    pub rouge_l: RougeLComponents,
    pub meteor: MeteorComponents,
    pub embed: EmbedScoreComponents,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub bleu: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub embed_precision: f64,
    pub embed_recall: f64,
    pub embed_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: Vec<PairScores>,
    pub mean: MeanScores,
}

/// Scores every pair. BLEU uses all references at once; the other metrics
/// keep the best-scoring reference.
pub async fn evaluate_corpus<P: EmbeddingProvider + ?Sized>(
    pairs: &[EvalPair],
    provider: &P,
    options: &BleuOptions,
) -> Result<MetricReport, EvalError> {
    let mut scored = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let refs: Vec<&str> = pair.references.iter().map(String::as_str).collect();
        let refs_or_empty: Vec<&str> = if refs.is_empty() { vec![""] } else { refs.clone() };
        let bleu = bleu_with(&pair.candidate, &refs_or_empty, options);

        let mut best_rouge: Option<RougeLComponents> = None;
        let mut best_meteor: Option<MeteorComponents> = None;
        let mut best_embed: Option<EmbedScoreComponents> = None;
        for r in &refs_or_empty {
            let rl = rouge_l(&pair.candidate, r);
            if best_rouge.as_ref().is_none_or(|b| rl.f > b.f) {
                best_rouge = Some(rl);
            }
            let m = meteor(&pair.candidate, r);
            if best_meteor.as_ref().is_none_or(|b| m.meteor > b.meteor) {
                best_meteor = Some(m);
            }
            let e = embed_score(&pair.candidate, r, provider).await?;
            if best_embed.as_ref().is_none_or(|b| e.f1 > b.f1) {
                best_embed = Some(e);
            }
        }
        scored.push(PairScores {
            id: pair.id.clone(),
            bleu,
            rouge_l: best_rouge.expect("at least one reference"),
            meteor: best_meteor.expect("at least one reference"),
            embed: best_embed.expect("at least one reference"),
        });
    }
    let avg = |f: &dyn Fn(&PairScores) -> f64| {
        if scored.is_empty() {
            0.0
        } else {
            scored.iter().map(f).sum::<f64>() / scored.len() as f64
        }
    };
    let mean = MeanScores {
        bleu: avg(&|p| p.bleu.bleu),
        rouge_l: avg(&|p| p.rouge_l.f),
        meteor: avg(&|p| p.meteor.meteor),
        embed_precision: avg(&|p| p.embed.precision),
        embed_recall: avg(&|p| p.embed.recall),
        embed_f1: avg(&|p| p.embed.f1),
    };
    Ok(MetricReport { pairs: scored, mean })
}

const CSV_HEADER: [&str; 10] = [
    "id",
    "bleu",
    "rouge_l_precision",
    "rouge_l_recall",
    "rouge_l_f",
    "meteor",
    "embed_precision",
    "embed_recall",
    "embed_f1",
    "brevity_penalty",
];

impl MetricReport {
    /// Per-pair rows followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |x: f64| format!("{x:.6}");
        w.write_record(CSV_HEADER).expect("in-memory write");
        for p in &self.pairs {
            w.write_record([
                p.id.clone(),
                fmt(p.bleu.bleu),
                fmt(p.rouge_l.precision),
                fmt(p.rouge_l.recall),
                fmt(p.rouge_l.f),
                fmt(p.meteor.meteor),
                fmt(p.embed.precision),
                fmt(p.embed.recall),
                fmt(p.embed.f1),
                fmt(p.bleu.brevity_penalty),
            ])
            .expect("in-memory write");
        }
        let m = &self.mean;
        w.write_record([
            "mean".to_owned(),
            fmt(m.bleu),
            String::new(),
            String::new(),
            fmt(m.rouge_l),
            fmt(m.meteor),
            fmt(m.embed_precision),
            fmt(m.embed_recall),
            fmt(m.embed_f1),
            String::new(),
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes JSON when `path` ends in `.json`, CSV otherwise.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let body = if path.extension().is_some_and(|e| e == "json") { self.to_json() } else { self.to_csv() };
        std::fs::write(path, body)
    }
}

/// One line of a predictions or references file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextLine {
    pub id: String,
    pub text: String,
}

/// Reads `{"id": …, "text": …}` objects, one per line. Blank lines are skipped.
pub fn read_jsonl(path: &Path) -> Result<Vec<TextLine>, EvalError> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TextLine = serde_json::from_str(&line).map_err(|e| EvalError::BadLine {
            path: path.display().to_string(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(parsed);
    }
    Ok(out)
}

/// Joins predictions to references by id. Several reference lines may share
/// an id; every prediction needs at least one.
pub fn pair_by_id(predictions: Vec<TextLine>, references: Vec<TextLine>) -> Result<Vec<EvalPair>, EvalError> {
    let mut refs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in references {
        refs.entry(r.id).or_default().push(r.text);
    }
    let mut seen = std::collections::HashSet::new();
    predictions
        .into_iter()
        .map(|p| {
            if !seen.insert(p.id.clone()) {
                return Err(EvalError::DuplicatePrediction(p.id));
            }
            let references = refs.get(&p.id).cloned().ok_or_else(|| EvalError::MissingReference(p.id.clone()))?;
            Ok(EvalPair { id: p.id, candidate: p.text, references })
        })
        .collect()
}
