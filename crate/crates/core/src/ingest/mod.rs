//! CSV and webpage ingestion into the relational store.
//!
//! CSV rows are identified by a hash of their natural-key columns and change
//! detected by a hash of all fields. Webpages are reduced to visible text and
//! kept as a chain of versions, a new one only when the SHA-256 of the text
//! differs from the latest.

mod csv;
mod hash;
mod html;
mod store;
mod web;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Timestamp;

pub use self::csv::{parse_csv, CsvRecord, ParsedCsv};
pub use hash::{content_hash, fields_hash};
pub use html::extract_text;
pub use store::RelationalStore;
pub use web::{fetch_urls, parse_url_list, FetchOptions, UrlLine, UrlReport, UrlStatus};

/// Pseudo-table name under which web snapshots are synced.
pub const WEB_TABLE: &str = "web";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid table name {0:?}: use letters, digits and '_', starting with a letter")]
    InvalidTableName(String),
    #[error("natural key must name at least one distinct, non-empty column")]
    EmptyNaturalKey,
    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },
    #[error("natural key column {column:?} is not in the header")]
    MissingKeyColumn { column: String },
    #[error("line {line} repeats the natural key first seen on line {first_line}")]
    DuplicateKey { line: u64, first_line: u64 },
    #[error("table {table} schema differs from the file: {message}")]
    SchemaMismatch { table: String, message: String },
    #[error("invalid URL {url:?}: {reason}")]
    InvalidUrl { url: String, reason: String },
    #[error("database: {0}")]
    Db(#[from] rusqlite::Error),
    #[error("catalog: {0}")]
    Catalog(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<String>,
    pub natural_key: Vec<String>,
}

/// One relational record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRow {
    pub table: String,
    pub row_key: String,
    pub fields: IndexMap<String, String>,
    pub row_hash: String,
    pub ingested_at: Timestamp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub inserted: usize,
    pub updated: usize,
    pub unchanged: usize,
}

/// One stored capture of a URL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebSnapshot {
    pub url: String,
    pub text: String,
    pub content_hash: String,
    pub version: u32,
    pub fetched_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "version", rename_all = "snake_case")]
pub enum SnapshotOutcome {
    Unchanged,
    NewVersion(u32),
}

/// Accepts absolute `http`/`https` URLs with a host.
pub fn validate_url(raw: &str) -> Result<url::Url, IngestError> {
    let invalid = |reason: &str| IngestError::InvalidUrl { url: raw.to_owned(), reason: reason.into() };
    let parsed = url::Url::parse(raw.trim()).map_err(|e| invalid(&e.to_string()))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(invalid("scheme must be http or https"));
    }
    if parsed.host_str().is_none_or(str::is_empty) {
        return Err(invalid("missing host"));
    }
    Ok(parsed)
}
