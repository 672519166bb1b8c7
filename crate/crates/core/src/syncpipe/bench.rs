use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::sample::{SampleCorpus, SampleTable};
use super::{run_sync, SyncError};
use crate::clock::{Clock, ManualClock, Timestamp};
use crate::embed::{campus_synonyms, CountingProvider, HashedEmbedder};
use crate::ingest::{IngestStats, RelationalStore};
use crate::textprep::ChunkParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchOptions {
    pub seed: u64,
    /// Each phase is timed this many times on fresh stores; the median is reported.
    pub repeats: usize,
    pub dim: usize,
    pub chunk: ChunkParams,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { seed: 7, repeats: 3, dim: 256, chunk: ChunkParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: String,
    /// CSV re-ingest time (median).
    pub ingest_secs: f64,
    /// Relational → vector sync time (median).
    pub sync_secs: f64,
    pub total_secs: f64,
    pub rows_inserted: usize,
    pub rows_updated: usize,
    pub rows_selected: usize,
    pub embedded_texts: usize,
    pub embed_batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: usize,
    pub docs: usize,
    pub repeats: usize,
    pub phases: Vec<PhaseReport>,
}

impl BenchReport {
    pub fn phase(&self, name: &str) -> Option<&PhaseReport> {
        self.phases.iter().find(|p| p.phase == name)
    }

    /// One row per phase, ready for a bar chart.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "phase",
            "ingest_seconds",
            "sync_seconds",
            "total_seconds",
            "rows_selected",
            "embedded_texts",
            "embed_batches",
        ])
        .expect("write to Vec");
        for p in &self.phases {
            w.write_record([
                p.phase.clone(),
                format!("{:.6}", p.ingest_secs),
                format!("{:.6}", p.sync_secs),
                format!("{:.6}", p.total_secs),
                p.rows_selected.to_string(),
                p.embedded_texts.to_string(),
                p.embed_batches.to_string(),
            ])
            .expect("write to Vec");
        }
        String::from_utf8(w.into_inner().expect("flush to Vec")).expect("ASCII")
    }
}

struct Sample {
    ingest: f64,
    sync: f64,
    stats: IngestStats,
    rows_selected: usize,
    texts: usize,
    batches: usize,
}

/// A corpus serialized up front, so that timing covers ingestion only.
struct CsvFiles<'a> {
    files: Vec<(&'a SampleTable, Vec<u8>)>,
}

impl<'a> CsvFiles<'a> {
    fn new(corpus: &'a SampleCorpus) -> Self {
        Self { files: corpus.tables.iter().map(|t| (t, t.to_csv())).collect() }
    }
}

fn ingest_all(rel: &RelationalStore, corpus: &CsvFiles<'_>, clock: &dyn Clock) -> Result<IngestStats, SyncError> {
    let mut total = IngestStats::default();
    for (t, bytes) in &corpus.files {
        let s = rel.ingest_csv(bytes, t.name, &t.natural_key, clock)?;
        total.inserted += s.inserted;
        total.updated += s.updated;
        total.unchanged += s.unchanged;
    }
    Ok(total)
}

async fn run_once(
    options: &BenchOptions,
    base: &CsvFiles<'_>,
    edited: &CsvFiles<'_>,
) -> Result<Vec<Sample>, SyncError> {
    let dir = tempfile::tempdir()?;
    let rel = RelationalStore::open(&dir.path().join("corpus.sqlite"))?;
    let store_dir = dir.path().join("vectors");
    let embedder = HashedEmbedder::new(options.dim, options.seed)
        .map_err(|e| SyncError::Io(std::io::Error::other(e)))?
        .with_synonyms(campus_synonyms());
    let provider = CountingProvider::new(embedder);
    let clock = ManualClock::new(Timestamp(1_737_901_950));

    let mut out = Vec::with_capacity(3);
    for corpus in [base, edited, edited] {
        provider.reset();
        let t0 = Instant::now();
        let stats = ingest_all(&rel, corpus, &clock)?;
        let t1 = Instant::now();
        let synced = run_sync(&rel, &store_dir, &provider, options.chunk, &clock).await?;
        let t2 = Instant::now();
        if let Some(f) = synced.stats.failed_tables.first() {
            return Err(SyncError::Io(std::io::Error::other(format!("table {} failed: {}", f.table, f.error))));
        }
        out.push(Sample {
            ingest: (t1 - t0).as_secs_f64(),
            sync: (t2 - t1).as_secs_f64(),
            stats,
            rows_selected: synced.stats.rows_selected,
            texts: provider.texts_embedded(),
            batches: provider.batches(),
        });
        clock.advance(60);
    }
    Ok(out)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Times a fresh load, a 10%-modified reload and an unchanged reload of the
/// bundled sample corpus, each followed by a sync, on throwaway stores with
/// the deterministic embedder.
pub async fn bench_ingest(options: &BenchOptions) -> Result<BenchReport, SyncError> {
    let base = SampleCorpus::generate(options.seed);
    let edited = base.modified();
    let repeats = options.repeats.max(1);
    let (base_csv, edited_csv) = (CsvFiles::new(&base), CsvFiles::new(&edited));
    let mut runs = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        runs.push(run_once(options, &base_csv, &edited_csv).await?);
    }

    let phases = ["fresh", "update", "noop"]
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let ingest = median(runs.iter().map(|r| r[i].ingest).collect());
            let sync = median(runs.iter().map(|r| r[i].sync).collect());
            let last = &runs[repeats - 1][i];
            PhaseReport {
                phase: (*name).to_owned(),
                ingest_secs: ingest,
                sync_secs: sync,
                total_secs: median(runs.iter().map(|r| r[i].ingest + r[i].sync).collect()),
                rows_inserted: last.stats.inserted,
                rows_updated: last.stats.updated,
                rows_selected: last.rows_selected,
                embedded_texts: last.texts,
                embed_batches: last.batches,
            }
        })
        .collect();

    Ok(BenchReport { rows: base.row_count(), docs: base.doc_count(), repeats, phases })
}

impl BenchReport {
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}
