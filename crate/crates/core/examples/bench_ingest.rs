//! Times fresh, 10%-modified and unchanged ingestion runs of the bundled
//! sample corpus and writes a bar-chart-ready CSV.
//!
//! cargo run --release --example bench_ingest -- [out.csv]

use unirag::syncpipe::{bench_ingest, BenchOptions};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1);
    let report = bench_ingest(&BenchOptions::default()).await?;

    println!("{} rows rendering to {} documents, median of {} runs", report.rows, report.docs, report.repeats);
    println!("{:<8} {:>10} {:>10} {:>10} {:>9} {:>8}", "phase", "ingest s", "sync s", "total s", "embedded", "batches");
    for p in &report.phases {
        println!(
            "{:<8} {:>10.4} {:>10.4} {:>10.4} {:>9} {:>8}",
            p.phase, p.ingest_secs, p.sync_secs, p.total_secs, p.embedded_texts, p.embed_batches
        );
    }
    if let Some(path) = out {
        report.write_csv(path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
