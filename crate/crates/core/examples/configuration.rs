//! Parses the annotated sample config, applies environment overrides and
//! shows what validation rejects.
//!
//! cargo run --example configuration

use unirag::service::AppConfig;

const SAMPLE: &str = include_str!("../../../unirag.example.toml");

pub fn run() -> anyhow::Result<()> {
    let mut config: AppConfig = toml::from_str(SAMPLE)?;
    config.apply_env(|key| (key == "LLM_MODEL").then(|| "campus-assistant".to_owned()));
    config.validate()?;
    println!("store under {}", config.storage.data_dir.display());
    println!("vectors in {}", config.storage.vector_dir().display());
    println!("llm {:?} model {:?}", config.llm.provider, config.llm.http.model);
    println!(
        "fusion weight {} with BM25 k1={} b={}",
        config.retrieval.lambda, config.retrieval.bm25.k1, config.retrieval.bm25.b
    );

    let mut bad = config.clone();
    bad.retrieval.lambda = 1.5;
    println!("rejected: {}", bad.validate().unwrap_err());
    let typo = toml::from_str::<AppConfig>("[retrieval]\nlamda = 0.3\n");
    println!("rejected: {}", typo.unwrap_err().message());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run()
}
