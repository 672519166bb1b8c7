use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use indexmap::IndexMap;
use rusqlite::{params, Connection, OptionalExtension, TransactionBehavior};

use super::csv::parse_csv;
use super::hash::{content_hash, fields_hash, load_fingerprint};
use super::{validate_url, IngestError, IngestStats, SnapshotOutcome, SourceRow, TableSchema, WebSnapshot, WEB_TABLE};
use crate::clock::{Clock, Timestamp};

const CATALOG_DDL: &str = "
CREATE TABLE IF NOT EXISTS _tables (
    name        TEXT PRIMARY KEY,
    columns     TEXT NOT NULL,
    natural_key TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS _table_loads (
    name        TEXT PRIMARY KEY,
    fingerprint TEXT NOT NULL,
    rows        INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS _web_snapshots (
    url          TEXT NOT NULL,
    version      INTEGER NOT NULL,
    text         TEXT NOT NULL,
    content_hash TEXT NOT NULL,
    fetched_at   INTEGER NOT NULL,
    PRIMARY KEY (url, version)
);
";

/// Embedded relational store: one SQL table per ingested CSV plus the
/// versioned web snapshot table.
///
/// All access goes through one connection guarded by a mutex, which makes the
/// store a single serialized writer. Every mutation runs in a transaction, so
/// readers only ever observe committed rows and versions.
pub struct RelationalStore {
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for RelationalStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RelationalStore").finish_non_exhaustive()
    }
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn data_table(table: &str) -> String {
    quote_ident(&format!("data_{table}"))
}

fn valid_table_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && name.len() <= 63
}

impl RelationalStore {
    pub fn open(path: &Path) -> Result<Self, IngestError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, IngestError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, IngestError> {
        conn.execute_batch(CATALOG_DDL)?;
        Ok(Self { conn: Mutex::new(conn) })
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        // A panic while holding the lock cannot leave a half-applied
        // transaction behind (SQLite rolls it back), so poisoning is ignored.
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Loads a CSV file into `table`, keyed by the `natural_key` columns.
    ///
    /// New keys are inserted and changed rows updated, both stamped with the
    /// current time; unchanged rows keep their previous timestamp. The whole
    /// file is validated before anything is written and applied in one
    /// transaction. Re-uploading the exact file last loaded into `table` with
    /// the same key is recognized up front and reports every row unchanged.
    pub fn ingest_csv<S: AsRef<str>>(
        &self,
        bytes: &[u8],
        table: &str,
        natural_key: &[S],
        clock: &dyn Clock,
    ) -> Result<IngestStats, IngestError> {
        if !valid_table_name(table) || table == WEB_TABLE {
            return Err(IngestError::InvalidTableName(table.to_owned()));
        }
        let natural_key: Vec<String> = natural_key.iter().map(|k| k.as_ref().trim().to_owned()).collect();
        if natural_key.is_empty() || natural_key.iter().any(String::is_empty) {
            return Err(IngestError::EmptyNaturalKey);
        }

        let fingerprint = load_fingerprint(bytes, &natural_key);
        let last_load: Option<(String, usize)> = self
            .conn()
            .query_row("SELECT fingerprint, rows FROM _table_loads WHERE name = ?1", [table], |r| {
                Ok((r.get(0)?, r.get(1)?))
            })
            .optional()?;
        if let Some((_, rows)) = last_load.filter(|(f, _)| *f == fingerprint) {
            return Ok(IngestStats { unchanged: rows, ..IngestStats::default() });
        }

        let parsed = parse_csv(bytes)?;
        let mut key_idx = Vec::with_capacity(natural_key.len());
        for k in &natural_key {
            let idx = parsed
                .columns
                .iter()
                .position(|c| c == k)
                .ok_or_else(|| IngestError::MissingKeyColumn { column: k.clone() })?;
            if key_idx.contains(&idx) {
                return Err(IngestError::EmptyNaturalKey);
            }
            key_idx.push(idx);
        }
        let schema = TableSchema { name: table.to_owned(), columns: parsed.columns.clone(), natural_key };

        struct Prepared {
            key: String,
            hash: String,
            values: Vec<String>,
        }
        let mut seen = std::collections::HashMap::new();
        let mut rows = Vec::with_capacity(parsed.records.len());
        for rec in parsed.records {
            let key_values: Vec<&str> = key_idx.iter().map(|&i| rec.values[i].as_str()).collect();
            let key = fields_hash(&key_values);
            if let Some(first_line) = seen.insert(key.clone(), rec.line) {
                return Err(IngestError::DuplicateKey { line: rec.line, first_line });
            }
            rows.push(Prepared { hash: fields_hash(&rec.values), key, values: rec.values });
        }

        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        match load_schema(&tx, table)? {
            Some(existing) if existing != schema => {
                return Err(IngestError::SchemaMismatch {
                    table: table.to_owned(),
                    message: format!(
                        "stored columns {:?} keyed by {:?}, file has {:?} keyed by {:?}",
                        existing.columns, existing.natural_key, schema.columns, schema.natural_key
                    ),
                });
            }
            Some(_) => {}
            None => create_table(&tx, &schema)?,
        }

        let dt = data_table(table);
        let last: Option<i64> = tx.query_row(&format!("SELECT MAX(_ingested_at) FROM {dt}"), [], |r| r.get(0))?;
        let now = clock.now().0.max(last.unwrap_or(i64::MIN));

        let cols = schema.columns.iter().map(|c| quote_ident(c)).collect::<Vec<_>>();
        let placeholders = (0..cols.len()).map(|i| format!("?{}", i + 4)).collect::<Vec<_>>();
        let insert_sql = format!(
            "INSERT INTO {dt} (_row_key, _row_hash, _ingested_at, {}) VALUES (?1, ?2, ?3, {})",
            cols.join(", "),
            placeholders.join(", ")
        );
        let update_sql = format!(
            "UPDATE {dt} SET _row_hash = ?2, _ingested_at = ?3, {} WHERE _row_key = ?1",
            cols.iter().zip(&placeholders).map(|(c, p)| format!("{c} = {p}")).collect::<Vec<_>>().join(", ")
        );

        let mut stats = IngestStats::default();
        {
            let mut existing_hashes = std::collections::HashMap::new();
            let mut scan = tx.prepare(&format!("SELECT _row_key, _row_hash FROM {dt}"))?;
            let mut cursor = scan.query([])?;
            while let Some(r) = cursor.next()? {
                existing_hashes.insert(r.get::<_, String>(0)?, r.get::<_, String>(1)?);
            }
            let mut insert = tx.prepare(&insert_sql)?;
            let mut update = tx.prepare(&update_sql)?;
            for row in &rows {
                let existing = existing_hashes.get(&row.key);
                let mut bound: Vec<&dyn rusqlite::ToSql> = vec![&row.key, &row.hash, &now];
                bound.extend(row.values.iter().map(|v| v as &dyn rusqlite::ToSql));
                match existing {
                    None => {
                        insert.execute(bound.as_slice())?;
                        stats.inserted += 1;
                    }
                    Some(h) if *h == row.hash => stats.unchanged += 1,
                    Some(_) => {
                        update.execute(bound.as_slice())?;
                        stats.updated += 1;
                    }
                }
            }
        }
        tx.execute(
            "INSERT OR REPLACE INTO _table_loads (name, fingerprint, rows) VALUES (?1, ?2, ?3)",
            params![table, fingerprint, rows.len()],
        )?;
        tx.commit()?;
        Ok(stats)
    }

    pub fn schema(&self, table: &str) -> Result<Option<TableSchema>, IngestError> {
        load_schema(&self.conn(), table)
    }

    /// All ingested tables, by name.
    pub fn tables(&self) -> Result<Vec<TableSchema>, IngestError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT name, columns, natural_key FROM _tables ORDER BY name")?;
        let rows = stmt.query_map([], schema_from_row)?;
        rows.map(|r| r?.map_err(IngestError::from)).collect()
    }

    pub fn row(&self, table: &str, row_key: &str) -> Result<Option<SourceRow>, IngestError> {
        let Some(schema) = self.schema(table)? else {
            return Ok(None);
        };
        let conn = self.conn();
        let sql = format!("{} WHERE _row_key = ?1", select_rows_sql(&schema));
        let row = conn.query_row(&sql, [row_key], |r| source_row(&schema, r)).optional()?;
        Ok(row)
    }

    pub fn row_exists(&self, table: &str, row_key: &str) -> Result<bool, IngestError> {
        if table == WEB_TABLE {
            let conn = self.conn();
            let mut stmt = conn.prepare("SELECT DISTINCT url FROM _web_snapshots")?;
            let urls = stmt.query_map([], |r| r.get::<_, String>(0))?;
            for url in urls {
                if content_hash(&url?) == row_key {
                    return Ok(true);
                }
            }
            return Ok(false);
        }
        Ok(self.row(table, row_key)?.is_some())
    }

    /// Rows with `ingested_at >= since`, ordered by (ingested_at, row_key).
    pub fn rows_since(&self, table: &str, since: Timestamp) -> Result<Vec<SourceRow>, IngestError> {
        let Some(schema) = self.schema(table)? else {
            return Ok(Vec::new());
        };
        let conn = self.conn();
        let sql = format!("{} WHERE _ingested_at >= ?1 ORDER BY _ingested_at, _row_key", select_rows_sql(&schema));
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt.query_map([since.0], |r| source_row(&schema, r))?;
        rows.map(|r| r.map_err(IngestError::from)).collect()
    }

    pub fn rows(&self, table: &str) -> Result<Vec<SourceRow>, IngestError> {
        self.rows_since(table, Timestamp(i64::MIN))
    }

    pub fn row_count(&self, table: &str) -> Result<usize, IngestError> {
        if self.schema(table)?.is_none() {
            return Ok(0);
        }
        let n: i64 = self.conn().query_row(&format!("SELECT COUNT(*) FROM {}", data_table(table)), [], |r| r.get(0))?;
        Ok(n as usize)
    }

    /// Stores `text` as the next version of `url` unless it matches the
    /// latest stored version byte for byte (by SHA-256).
    pub fn record_snapshot(&self, url: &str, text: &str, clock: &dyn Clock) -> Result<SnapshotOutcome, IngestError> {
        let url = validate_url(url)?;
        let hash = content_hash(text);
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let latest: Option<(u32, String)> = tx
            .query_row(
                "SELECT version, content_hash FROM _web_snapshots
                 WHERE url = ?1 ORDER BY version DESC LIMIT 1",
                [url.as_str()],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?;
        let version = match latest {
            Some((_, h)) if h == hash => return Ok(SnapshotOutcome::Unchanged),
            Some((v, _)) => v + 1,
            None => 1,
        };
        // Snapshots sync as one pseudo-table, so keep fetch times monotone
        // across all URLs, not just this one.
        let last: Option<i64> = tx.query_row("SELECT MAX(fetched_at) FROM _web_snapshots", [], |r| r.get(0))?;
        let fetched_at = clock.now().0.max(last.unwrap_or(i64::MIN));
        tx.execute(
            "INSERT INTO _web_snapshots (url, version, text, content_hash, fetched_at)
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![url.as_str(), version, text, hash, fetched_at],
        )?;
        tx.commit()?;
        Ok(SnapshotOutcome::NewVersion(version))
    }

    /// Every stored version of `url`, oldest first.
    pub fn snapshot_versions(&self, url: &str) -> Result<Vec<WebSnapshot>, IngestError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT url, version, text, content_hash, fetched_at FROM _web_snapshots
             WHERE url = ?1 ORDER BY version",
        )?;
        let rows = stmt.query_map([url], snapshot_from_row)?;
        rows.map(|r| r.map_err(IngestError::from)).collect()
    }

    pub fn snapshot(&self, url: &str, version: u32) -> Result<Option<WebSnapshot>, IngestError> {
        let conn = self.conn();
        Ok(conn
            .query_row(
                "SELECT url, version, text, content_hash, fetched_at FROM _web_snapshots
                 WHERE url = ?1 AND version = ?2",
                params![url, version],
                snapshot_from_row,
            )
            .optional()?)
    }

    /// The newest version of every URL, ordered by url.
    pub fn latest_snapshots(&self) -> Result<Vec<WebSnapshot>, IngestError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT s.url, s.version, s.text, s.content_hash, s.fetched_at
             FROM _web_snapshots s
             JOIN (SELECT url, MAX(version) AS v FROM _web_snapshots GROUP BY url) m
               ON s.url = m.url AND s.version = m.v
             ORDER BY s.url",
        )?;
        let rows = stmt.query_map([], snapshot_from_row)?;
        rows.map(|r| r.map_err(IngestError::from)).collect()
    }

    pub fn snapshot_count(&self) -> Result<usize, IngestError> {
        let n: i64 = self.conn().query_row("SELECT COUNT(*) FROM _web_snapshots", [], |r| r.get(0))?;
        Ok(n as usize)
    }

    /// Cheap liveness probe.
    pub fn check(&self) -> Result<(), IngestError> {
        self.conn().query_row("SELECT COUNT(*) FROM _tables", [], |r| r.get::<_, i64>(0))?;
        Ok(())
    }
}

fn select_rows_sql(schema: &TableSchema) -> String {
    let cols = schema.columns.iter().map(|c| quote_ident(c)).collect::<Vec<_>>().join(", ");
    format!("SELECT _row_key, _row_hash, _ingested_at, {cols} FROM {}", data_table(&schema.name))
}

fn source_row(schema: &TableSchema, r: &rusqlite::Row<'_>) -> rusqlite::Result<SourceRow> {
    let mut fields = IndexMap::with_capacity(schema.columns.len());
    for (i, c) in schema.columns.iter().enumerate() {
        fields.insert(c.clone(), r.get::<_, String>(i + 3)?);
    }
    Ok(SourceRow {
        table: schema.name.clone(),
        row_key: r.get(0)?,
        row_hash: r.get(1)?,
        ingested_at: Timestamp(r.get(2)?),
        fields,
    })
}

fn snapshot_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<WebSnapshot> {
    Ok(WebSnapshot {
        url: r.get(0)?,
        version: r.get(1)?,
        text: r.get(2)?,
        content_hash: r.get(3)?,
        fetched_at: Timestamp(r.get(4)?),
    })
}

fn schema_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<Result<TableSchema, serde_json::Error>> {
    let name: String = r.get(0)?;
    let columns: String = r.get(1)?;
    let key: String = r.get(2)?;
    Ok((|| {
        Ok(TableSchema { name, columns: serde_json::from_str(&columns)?, natural_key: serde_json::from_str(&key)? })
    })())
}

fn load_schema(conn: &Connection, table: &str) -> Result<Option<TableSchema>, IngestError> {
    let found = conn
        .query_row("SELECT name, columns, natural_key FROM _tables WHERE name = ?1", [table], schema_from_row)
        .optional()?;
    match found {
        None => Ok(None),
        Some(parsed) => Ok(Some(parsed?)),
    }
}

fn create_table(conn: &Connection, schema: &TableSchema) -> Result<(), IngestError> {
    let cols =
        schema.columns.iter().map(|c| format!("{} TEXT NOT NULL", quote_ident(c))).collect::<Vec<_>>().join(", ");
    let dt = data_table(&schema.name);
    conn.execute_batch(&format!(
        "CREATE TABLE {dt} (
            _row_key TEXT PRIMARY KEY,
            _row_hash TEXT NOT NULL,
            _ingested_at INTEGER NOT NULL,
            {cols}
        );
        CREATE INDEX {} ON {dt} (_ingested_at);",
        quote_ident(&format!("idx_{}_ingested_at", schema.name))
    ))?;
    conn.execute(
        "INSERT INTO _tables (name, columns, natural_key) VALUES (?1, ?2, ?3)",
        params![schema.name, serde_json::to_string(&schema.columns)?, serde_json::to_string(&schema.natural_key)?],
    )?;
    Ok(())
}
