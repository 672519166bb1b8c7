//! Normalization, tokenization, lemmatization and integer encoding.
//!
//! cargo run --example text_preprocessing

use unirag::textprep::{analyze, encode, lemmatize, normalize, pad, tokenize, Vocabulary};

pub fn run() -> anyhow::Result<()> {
    let raw = "  Advising   STARTS before Pre-Registration; students' GPAs are reviewed!  ";
    println!("normalized: {:?}", normalize(raw));
    println!("tokens:     {:?}", tokenize(raw).tokens());
    for word in ["studies", "classes", "advising", "reviewed", "fees"] {
        println!("lemma({word}) = {}", lemmatize(word));
    }

    let corpus = [
        analyze("Students register for courses during advising."),
        analyze("Course advising opens before registration."),
    ];
    let vocab = Vocabulary::fit(corpus.iter());
    println!("vocabulary of {} words", vocab.len());
    let query = analyze("advising courses for students");
    let ids = encode(&query, &vocab);
    println!("{:?} -> {ids:?}", query.tokens());
    println!("padded: {:?}", pad(&ids, 8));
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run()
}
