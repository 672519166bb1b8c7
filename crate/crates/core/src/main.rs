use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use unirag::clock::SystemClock;
use unirag::evalkit::{evaluate_corpus, pair_by_id, read_jsonl, BleuOptions};
use unirag::ingest::{fetch_urls, FetchOptions, RelationalStore, UrlStatus};
use unirag::retriever::ScoredDoc;
use unirag::service::{serve, AppConfig, AppState};
use unirag::syncpipe::{bench_ingest, run_sync, BenchOptions};

#[derive(Parser)]
#[command(name = "unirag", version, about = "Campus knowledge base with hybrid retrieval and grounded chat")]
struct Cli {
    /// TOML config file. Defaults to ./unirag.toml when present.
    #[arg(long, global = true, env = "UNIRAG_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve,
    /// Load data into the relational store.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Embed new and changed rows into the vector store.
    Sync,
    /// Time fresh, update and no-op ingestion on the bundled sample corpus.
    BenchIngest {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = BenchOptions::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = BenchOptions::default().repeats)]
        repeats: usize,
    },
    /// Hybrid search without calling the LLM.
    Search {
        query: String,
        #[arg(short, default_value_t = 5)]
        k: usize,
        /// Weight of the BM25 score (0..=1).
        #[arg(long)]
        lambda: Option<f64>,
        /// Print every score component.
        #[arg(long)]
        explain: bool,
    },
    /// Interactive chat on stdin.
    Chat {
        /// Continue an existing session.
        #[arg(long)]
        session: Option<String>,
    },
    /// Score predictions against references.
    Eval {
        #[arg(long = "pred")]
        predictions: PathBuf,
        #[arg(long = "ref")]
        references: PathBuf,
        /// `.json` writes JSON, anything else CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add-one smoothing for higher-order BLEU precisions.
        #[arg(long)]
        smooth_bleu: bool,
    },
}

#[derive(Subcommand)]
enum IngestCommand {
    /// Upsert a CSV file into a table.
    Csv {
        file: PathBuf,
        #[arg(long)]
        table: String,
        /// Natural-key column(s), comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        key: Vec<String>,
    },
    /// Fetch every URL in a list file (one per line, `#` comments).
    Web { urls: PathBuf },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<AppConfig> {
    let default = Path::new("unirag.toml");
    let path = path.or_else(|| default.exists().then_some(default));
    Ok(AppConfig::load(path)?)
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn print_hits(hits: &[ScoredDoc], explain: bool) {
    if hits.is_empty() {
        println!("no results");
        return;
    }
    for (rank, h) in hits.iter().enumerate() {
        let s = &h.scores;
        if explain {
            let distance = s.distance.map_or("-".to_owned(), |d| format!("{d:.6}"));
            println!(
                "{:>2}. {}  combined={:.6} bm25_raw={:.6} bm25_norm={:.6} distance={} similarity={:.6}",
                rank + 1,
                h.id,
                s.combined,
                s.bm25_raw,
                s.bm25_norm,
                distance,
                s.similarity
            );
        } else {
            println!("{:>2}. {}  combined={:.4}", rank + 1, h.id, s.combined);
        }
        println!("    {}", h.document);
    }
}

async fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::BenchIngest { out, seed, repeats } => {
            let opts = BenchOptions { seed, repeats, ..BenchOptions::default() };
            let report = bench_ingest(&opts).await?;
            print!("{}", report.to_csv());
            if let Some(out) = out {
                report.write_csv(&out)?;
                eprintln!("wrote {}", out.display());
            }
            return Ok(());
        }
        Command::Eval { predictions, references, out, smooth_bleu } => {
            let config = load_config(cli.config.as_deref())?;
            let pairs = pair_by_id(read_jsonl(&predictions)?, read_jsonl(&references)?)?;
            let embedder = config.build_embedder()?;
            let options = BleuOptions { smoothing: smooth_bleu, ..BleuOptions::default() };
            let report = evaluate_corpus(&pairs, embedder.as_ref(), &options).await?;
            let m = &report.mean;
            println!("pairs       {}", report.pairs.len());
            println!("bleu        {:.4}", m.bleu);
            println!("rouge_l     {:.4}", m.rouge_l);
            println!("meteor      {:.4}", m.meteor);
            println!("embed_f1    {:.4}", m.embed_f1);
            if let Some(out) = out {
                report.write(&out)?;
                eprintln!("wrote {}", out.display());
            }
            return Ok(());
        }
        _ => {}
    }

    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Serve => serve(config).await?,
        Command::Ingest(IngestCommand::Csv { file, table, key }) => {
            let bytes = std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let rel = RelationalStore::open(&config.storage.relational_db())?;
            let stats = rel.ingest_csv(&bytes, &table, &key, &SystemClock)?;
            print_json(&stats)?;
        }
        Command::Ingest(IngestCommand::Web { urls }) => {
            let list = std::fs::read_to_string(&urls).with_context(|| format!("reading {}", urls.display()))?;
            let rel = RelationalStore::open(&config.storage.relational_db())?;
            let reports = fetch_urls(&rel, &list, &FetchOptions::default(), &SystemClock).await;
            for r in &reports {
                let status = match &r.status {
                    UrlStatus::Snapshot { outcome } => serde_json::to_string(outcome)?,
                    UrlStatus::Invalid { reason } => format!("invalid: {reason}"),
                    UrlStatus::FetchFailed { reason } => format!("fetch failed: {reason}"),
                    UrlStatus::StoreFailed { reason } => format!("store failed: {reason}"),
                };
                println!("line {:>4}  {}  {}", r.line, r.url, status);
            }
        }
        Command::Sync => {
            let rel = RelationalStore::open(&config.storage.relational_db())?;
            let embedder = config.build_embedder()?;
            let outcome =
                run_sync(&rel, &config.storage.vector_dir(), embedder.as_ref(), config.chunk_params()?, &SystemClock)
                    .await?;
            print_json(&outcome.stats)?;
            if !outcome.stats.failed_tables.is_empty() {
                bail!("{} table(s) failed to sync", outcome.stats.failed_tables.len());
            }
        }
        Command::Search { query, k, lambda, explain } => {
            let state = AppState::open(config)?;
            let retriever = state.retriever();
            let lambda = lambda.unwrap_or(retriever.config().lambda);
            let hits = retriever.retrieve_with_lambda(&query, k, lambda).await?;
            print_hits(&hits, explain);
        }
        Command::Chat { session } => {
            let state = Arc::new(AppState::open(config)?);
            let mut session = session;
            let stdin = std::io::stdin();
            eprintln!("Ask a question (empty line or Ctrl-D to quit).");
            loop {
                eprint!("> ");
                std::io::stderr().flush()?;
                let mut line = String::new();
                if stdin.lock().read_line(&mut line)? == 0 || line.trim().is_empty() {
                    break;
                }
                let turn = state.engine().ask(session.as_deref(), &line).await?;
                println!("{}", turn.reply);
                let ids: Vec<&str> = turn.sources.iter().map(|s| s.id.as_str()).collect();
                println!("Sources: [{}]", ids.join(", "));
                session = Some(turn.session_id);
            }
            if let Some(id) = session {
                eprintln!("session {id}");
            }
        }
        Command::BenchIngest { .. } | Command::Eval { .. } => unreachable!("handled above"),
    }
    Ok(())
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()).await {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
