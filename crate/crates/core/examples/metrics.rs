//! Answer-quality metrics for single pairs and for a small corpus.
//!
//! cargo run --example metrics

use unirag::embed::HashedEmbedder;
use unirag::evalkit::{bleu, embed_score, evaluate_corpus, meteor, rouge_l, BleuOptions, EvalPair};

pub async fn run() -> anyhow::Result<()> {
    let candidate = "the cat sat on mat";
    let reference = "the cat sat on the mat";

    let b = bleu(candidate, &[reference]);
    println!("BLEU {:.4}  precisions {:?}  brevity penalty {:.4}", b.bleu, b.precisions, b.brevity_penalty);
    let r = rouge_l(candidate, reference);
    println!("ROUGE-L P {:.4} R {:.4} F {:.4} (lcs {})", r.precision, r.recall, r.f, r.lcs);
    let m = meteor(candidate, reference);
    println!("METEOR {:.4}  matches {} chunks {} penalty {:.4}", m.meteor, m.matches, m.chunks, m.penalty);

    let embedder = HashedEmbedder::new(256, 0)?;
    let e = embed_score(candidate, reference, &embedder).await?;
    println!("embedding P {:.4} R {:.4} F1 {:.4}", e.precision, e.recall, e.f1);

    let pairs = vec![
        EvalPair {
            id: "q1".into(),
            candidate: "CSE220 requires CSE111 and CSE230".into(),
            references: vec!["CSE220 requires CSE111 and CSE230.".into()],
        },
        EvalPair {
            id: "q2".into(),
            candidate: "The library opens at eight".into(),
            references: vec!["The library opens at 8am.".into(), "Library hours start at eight.".into()],
        },
    ];
    let report = evaluate_corpus(&pairs, &embedder, &BleuOptions { smoothing: true, ..BleuOptions::default() }).await?;
    print!("{}", report.to_csv());
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    run().await
}
