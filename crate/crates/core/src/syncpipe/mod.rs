//! Incremental relational → vector synchronization.
//!
//! Each run selects the rows a per-table [`IngestCursor`] has not yet seen,
//! renders them into short facet documents, embeds those and upserts them by
//! deterministic id. Web snapshots sync as the `web` pseudo-table, one row
//! per URL holding its latest version.

mod bench;
mod cursor;
mod render;
pub mod sample;

use std::fs::{File, TryLockError};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{Clock, Timestamp};
use crate::embed::{embed_texts, EmbeddingProvider};
use crate::ingest::{IngestError, RelationalStore, WEB_TABLE};
use crate::textprep::ChunkParams;
use crate::vecstore::{StoreError, VectorRecord, VectorStore};

pub use bench::{bench_ingest, BenchOptions, BenchReport, PhaseReport};
pub use cursor::{IngestCursor, TableCursor, CURSOR_FILE};
pub use render::{render_row, render_snapshot, web_row_key, RenderedDoc};

/// Documents embedded per provider call during sync.
const EMBED_GROUP: usize = 256;
const LOCK_FILE: &str = "sync.lock";

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("another sync is already running")]
    Busy,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("sync state: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableFailure {
    pub table: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SyncStats {
    /// Rows read from the relational store while selecting.
    pub rows_scanned: usize,
    /// Rows newer than the cursor.
    pub rows_selected: usize,
    pub docs_embedded: usize,
    pub upserted: usize,
    pub inserted: usize,
    pub replaced: usize,
    /// Vector records dropped because their row no longer renders to them.
    pub removed: usize,
    pub elapsed_secs: f64,
    /// Tables whose cursor was not advanced because of an error.
    pub failed_tables: Vec<TableFailure>,
}

impl SyncStats {
    pub fn changed_anything(&self) -> bool {
        self.upserted > 0 || self.removed > 0
    }
}

struct Selected {
    ingested_at: Timestamp,
    row_key: String,
    row_hash: String,
    docs: Vec<RenderedDoc>,
}

fn select_table(
    rel: &RelationalStore,
    table: &str,
    cursor: &TableCursor,
    params: ChunkParams,
    now: i64,
    stats: &mut SyncStats,
) -> Result<Vec<Selected>, IngestError> {
    let since = cursor.at.unwrap_or(Timestamp(i64::MIN));
    let rows = rel.rows_since(table, since)?;
    stats.rows_scanned += rows.len();
    Ok(rows
        .into_iter()
        .filter(|r| cursor.selects(r.ingested_at, &r.row_key, &r.row_hash))
        .map(|r| Selected {
            docs: render_row(&r, params, now),
            ingested_at: r.ingested_at,
            row_key: r.row_key,
            row_hash: r.row_hash,
        })
        .collect())
}

fn select_web(
    rel: &RelationalStore,
    cursor: &TableCursor,
    params: ChunkParams,
    now: i64,
    stats: &mut SyncStats,
) -> Result<Vec<Selected>, IngestError> {
    let snaps = rel.latest_snapshots()?;
    stats.rows_scanned += snaps.len();
    Ok(snaps
        .into_iter()
        .filter_map(|s| {
            let key = web_row_key(&s.url);
            cursor.selects(s.fetched_at, &key, &s.content_hash).then(|| Selected {
                docs: render_snapshot(&s, params, now),
                ingested_at: s.fetched_at,
                row_key: key,
                row_hash: s.content_hash,
            })
        })
        .collect())
}

async fn apply<P: EmbeddingProvider + ?Sized>(
    table: &str,
    selected: &[Selected],
    vectors: &mut VectorStore,
    provider: &P,
    stats: &mut SyncStats,
) -> Result<(), String> {
    let docs: Vec<&RenderedDoc> = selected.iter().flat_map(|s| &s.docs).collect();
    for group in docs.chunks(EMBED_GROUP) {
        let texts: Vec<String> = group.iter().map(|d| d.text.clone()).collect();
        let embedded = embed_texts(provider, &texts).await.map_err(|e| e.to_string())?;
        stats.docs_embedded += texts.len();
        let records = group
            .iter()
            .zip(embedded)
            .map(|(d, vector)| VectorRecord {
                id: d.id.clone(),
                vector,
                document: d.text.clone(),
                metadata: d.metadata.clone(),
            })
            .collect();
        let up = vectors.upsert(records).map_err(|e| e.to_string())?;
        stats.inserted += up.inserted;
        stats.replaced += up.replaced;
        stats.upserted += up.inserted + up.replaced;
    }
    for s in selected {
        let keep: Vec<&str> = s.docs.iter().map(|d| d.id.as_str()).collect();
        stats.removed += vectors.remove_stale(table, &s.row_key, &keep);
    }
    Ok(())
}

/// Rows selected for one table, not yet embedded.
struct TablePlan {
    table: String,
    cursor: TableCursor,
    selected: Vec<Selected>,
}

/// What a sync run would do, computed from the relational store and the
/// cursor alone.
pub struct SyncPlan {
    tables: Vec<TablePlan>,
    stats: SyncStats,
    started: Instant,
}

impl SyncPlan {
    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn rows_selected(&self) -> usize {
        self.stats.rows_selected
    }

    pub fn docs_to_embed(&self) -> usize {
        self.tables.iter().flat_map(|t| &t.selected).map(|s| s.docs.len()).sum()
    }
}

/// Selects the rows of every table (and the `web` pseudo-table) that the
/// cursor has not seen, and renders them.
pub fn plan_sync(
    rel: &RelationalStore,
    cursor: &IngestCursor,
    params: ChunkParams,
    clock: &dyn Clock,
) -> Result<SyncPlan, SyncError> {
    let started = Instant::now();
    let now = clock.now().0;
    let mut stats = SyncStats::default();
    let mut names: Vec<String> = rel.tables()?.into_iter().map(|t| t.name).collect();
    names.push(WEB_TABLE.to_owned());

    let mut tables = Vec::new();
    for table in names {
        let tc = cursor.table(&table);
        let selected = if table == WEB_TABLE {
            select_web(rel, &tc, params, now, &mut stats)
        } else {
            select_table(rel, &table, &tc, params, now, &mut stats)
        };
        match selected {
            Ok(selected) if selected.is_empty() => {}
            Ok(selected) => {
                stats.rows_selected += selected.len();
                tables.push(TablePlan { table, cursor: tc, selected });
            }
            Err(e) => stats.failed_tables.push(TableFailure { table, error: e.to_string() }),
        }
    }
    Ok(SyncPlan { tables, stats, started })
}

/// Embeds and upserts a plan, advancing `cursor` for every table that
/// synced cleanly.
///
/// A table whose embedding or upsert fails is listed in
/// [`SyncStats::failed_tables`] and keeps its old cursor; records already
/// upserted for it stay, and the next run re-embeds the same ids.
pub async fn execute_sync<P: EmbeddingProvider + ?Sized>(
    plan: SyncPlan,
    vectors: &mut VectorStore,
    provider: &P,
    cursor: &mut IngestCursor,
) -> Result<SyncStats, SyncError> {
    let configured = provider.fingerprint();
    if *vectors.fingerprint() != configured {
        return Err(StoreError::FingerprintMismatch { stored: vectors.fingerprint().clone(), configured }.into());
    }
    let SyncPlan { tables, mut stats, started } = plan;
    for TablePlan { table, cursor: mut tc, selected } in tables {
        match apply(&table, &selected, vectors, provider, &mut stats).await {
            Ok(()) => {
                tc.advance(selected.iter().map(|s| (s.ingested_at, s.row_key.as_str(), s.row_hash.as_str())));
                cursor.tables.insert(table, tc);
            }
            Err(error) => {
                log::error!("sync of table {table} failed: {error}");
                stats.failed_tables.push(TableFailure { table, error });
            }
        }
    }
    stats.elapsed_secs = started.elapsed().as_secs_f64();
    Ok(stats)
}

/// Brings `vectors` up to date with `rel`: [`plan_sync`] then
/// [`execute_sync`].
pub async fn sync<P: EmbeddingProvider + ?Sized>(
    rel: &RelationalStore,
    vectors: &mut VectorStore,
    provider: &P,
    cursor: &mut IngestCursor,
    params: ChunkParams,
    clock: &dyn Clock,
) -> Result<SyncStats, SyncError> {
    let plan = plan_sync(rel, cursor, params, clock)?;
    execute_sync(plan, vectors, provider, cursor).await
}

/// Exclusive, cross-process sync lock held on a file in the store
/// directory. Released on drop or process exit.
#[derive(Debug)]
pub struct SyncLock {
    _file: File,
}

impl SyncLock {
    pub fn acquire(store_dir: &Path) -> Result<Self, SyncError> {
        std::fs::create_dir_all(store_dir)?;
        let file = File::options().create(true).truncate(false).write(true).open(store_dir.join(LOCK_FILE))?;
        match file.try_lock() {
            Ok(()) => Ok(Self { _file: file }),
            Err(TryLockError::WouldBlock) => Err(SyncError::Busy),
            Err(TryLockError::Error(e)) => Err(e.into()),
        }
    }
}

#[derive(Debug)]
pub struct SyncOutcome {
    pub stats: SyncStats,
    /// The updated store, or `None` when nothing needed syncing and the
    /// store was not loaded.
    pub store: Option<VectorStore>,
}

/// Syncs the store persisted in `store_dir` under the sync lock.
///
/// The cursor is consulted first; when no row is pending the vector store is
/// never loaded. Otherwise the store is loaded, synced and persisted, then the
/// cursor. Should the process die between the two writes, the next run
/// re-selects the same rows and upserts the same ids, so the result converges.
pub async fn run_sync<P: EmbeddingProvider + ?Sized>(
    rel: &RelationalStore,
    store_dir: &Path,
    provider: &P,
    params: ChunkParams,
    clock: &dyn Clock,
) -> Result<SyncOutcome, SyncError> {
    let _lock = SyncLock::acquire(store_dir)?;
    let fingerprint = provider.fingerprint();
    let mut cursor = IngestCursor::load(store_dir)?;
    let plan = plan_sync(rel, &cursor, params, clock)?;
    if plan.is_empty() {
        if let Ok(manifest) = VectorStore::read_manifest(store_dir) {
            if manifest.fingerprint != fingerprint {
                return Err(
                    StoreError::FingerprintMismatch { stored: manifest.fingerprint, configured: fingerprint }.into()
                );
            }
        }
        let mut stats = plan.stats;
        stats.elapsed_secs = plan.started.elapsed().as_secs_f64();
        return Ok(SyncOutcome { stats, store: None });
    }

    let mut store = VectorStore::load_or_new(store_dir, &fingerprint)?;
    let before = cursor.clone();
    let stats = execute_sync(plan, &mut store, provider, &mut cursor).await?;
    if stats.changed_anything() || !store_dir.join("manifest.json").exists() {
        store.persist(store_dir)?;
    }
    if cursor != before {
        cursor.persist(store_dir)?;
    }
    Ok(SyncOutcome { stats, store: Some(store) })
}
