//! Exact nearest-neighbour vector store with upsert-by-id and on-disk
//! persistence.
//!
//! Distance is `1 - cosine`, so results fall in `[0, 2]`. Search is a linear
//! scan; at the corpus sizes this crate targets (≲10⁴ records) that is fast
//! and makes every result checkable against brute force.
//!
//! The on-disk layout is documented in `docs/vector-store-format.md`.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embed::{cosine, EmbeddingVector, ProviderFingerprint};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const RECORDS_FILE: &str = "records.bin";
const RECORDS_MAGIC: &[u8; 4] = b"UVS1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("record {id:?} has dimension {got}, store expects {expected}")]
    DimMismatch { id: String, expected: usize, got: usize },
    #[error("record ids must be non-empty")]
    EmptyId,
    #[error("query vector has dimension {got}, store expects {expected}")]
    QueryDim { expected: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error(
        "store was built with provider {stored}, but {configured} is configured; \
         re-index with the configured provider or switch back"
    )]
    FingerprintMismatch { stored: ProviderFingerprint, configured: ProviderFingerprint },
    #[error("unsupported store format version {0}")]
    Version(u32),
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error("store I/O: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub table: String,
    pub source_id: String,
    #[serde(default)]
    pub facet: String,
    pub chunk_index: usize,
    /// Unix seconds at which the text was rendered.
    pub rendered_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub id: String,
    pub vector: EmbeddingVector,
    pub document: String,
    pub metadata: RecordMetadata,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub format_version: u32,
    pub dim: usize,
    pub fingerprint: ProviderFingerprint,
    pub record_count: usize,
    /// SHA-256 of `records.bin`; guards against a manifest/records mismatch.
    pub records_sha256: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpsertStats {
    pub inserted: usize,
    pub replaced: usize,
}

#[derive(Debug, Clone)]
pub struct VectorStore {
    fingerprint: ProviderFingerprint,
    records: Vec<VectorRecord>,
    by_id: HashMap<String, usize>,
}

impl VectorStore {
    pub fn new(fingerprint: ProviderFingerprint) -> Self {
        Self { fingerprint, records: Vec::new(), by_id: HashMap::new() }
    }

    pub fn fingerprint(&self) -> &ProviderFingerprint {
        &self.fingerprint
    }

    pub fn dim(&self) -> usize {
        self.fingerprint.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&VectorRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[VectorRecord] {
        &self.records
    }

    /// Inserts new ids and fully replaces existing ones. The batch is
    /// validated first; on error the store is untouched.
    pub fn upsert(&mut self, records: Vec<VectorRecord>) -> Result<UpsertStats, StoreError> {
        for r in &records {
            if r.id.is_empty() {
                return Err(StoreError::EmptyId);
            }
            if r.vector.dim() != self.dim() {
                return Err(StoreError::DimMismatch { id: r.id.clone(), expected: self.dim(), got: r.vector.dim() });
            }
        }

        let mut stats = UpsertStats::default();
        for r in records {
            match self.by_id.get(&r.id) {
                Some(&i) => {
                    self.records[i] = r;
                    stats.replaced += 1;
                }
                None => {
                    self.by_id.insert(r.id.clone(), self.records.len());
                    self.records.push(r);
                    stats.inserted += 1;
                }
            }
        }
        Ok(stats)
    }

    /// Removes the record with `id`, if any.
    pub fn remove(&mut self, id: &str) -> Option<VectorRecord> {
        let idx = self.by_id.remove(id)?;
        let removed = self.records.swap_remove(idx);
        if let Some(moved) = self.records.get(idx) {
            self.by_id.insert(moved.id.clone(), idx);
        }
        Some(removed)
    }

    /// Removes every record of `(table, source_id)` whose id is not in `keep`.
    pub fn remove_stale(&mut self, table: &str, source_id: &str, keep: &[&str]) -> usize {
        let stale: Vec<String> = self
            .records
            .iter()
            .filter(|r| {
                r.metadata.table == table && r.metadata.source_id == source_id && !keep.contains(&r.id.as_str())
            })
            .map(|r| r.id.clone())
            .collect();
        for id in &stale {
            self.remove(id);
        }
        stale.len()
    }

    /// Exact k-nearest search by `1 - cosine`, ascending, ties by id.
    pub fn query(&self, vector: &[f64], k: usize) -> Result<Vec<(String, f64)>, StoreError> {
        if k == 0 {
            return Err(StoreError::ZeroK);
        }
        if vector.len() != self.dim() {
            return Err(StoreError::QueryDim { expected: self.dim(), got: vector.len() });
        }
        let mut scored: Vec<(&str, f64)> =
            self.records.iter().map(|r| (r.id.as_str(), 1.0 - cosine(vector, r.vector.values()))).collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        Ok(scored.into_iter().take(k).map(|(id, d)| (id.to_owned(), d)).collect())
    }

    /// Writes the store to `dir`, replacing any previous contents atomically
    /// per file (records first, then the manifest that vouches for them).
    pub fn persist(&self, dir: &Path) -> Result<StoreManifest, StoreError> {
        fs::create_dir_all(dir)?;
        let mut bytes = Vec::with_capacity(16 + self.records.len() * (self.dim() * 8 + 128));
        bytes.extend_from_slice(RECORDS_MAGIC);
        for r in &self.records {
            write_record(&mut bytes, r)?;
        }
        let manifest = StoreManifest {
            format_version: FORMAT_VERSION,
            dim: self.dim(),
            fingerprint: self.fingerprint.clone(),
            record_count: self.records.len(),
            records_sha256: hex::encode(Sha256::digest(&bytes)),
        };
        write_atomic(&dir.join(RECORDS_FILE), &bytes)?;
        let manifest_json = serde_json::to_vec_pretty(&manifest).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        write_atomic(&dir.join(MANIFEST_FILE), &manifest_json)?;
        Ok(manifest)
    }

    /// Loads a persisted store. When `expected` is given, a store built by a
    /// different provider is refused.
    pub fn load(dir: &Path, expected: Option<&ProviderFingerprint>) -> Result<Self, StoreError> {
        let manifest = Self::read_manifest(dir)?;
        if let Some(fp) = expected {
            if *fp != manifest.fingerprint {
                return Err(StoreError::FingerprintMismatch { stored: manifest.fingerprint, configured: fp.clone() });
            }
        }

        let bytes = fs::read(dir.join(RECORDS_FILE))?;
        if hex::encode(Sha256::digest(&bytes)) != manifest.records_sha256 {
            return Err(StoreError::Corrupt("records checksum does not match manifest".into()));
        }
        let mut cursor = io::Cursor::new(bytes.as_slice());
        let mut magic = [0u8; 4];
        cursor.read_exact(&mut magic)?;
        if &magic != RECORDS_MAGIC {
            return Err(StoreError::Corrupt("bad records magic".into()));
        }

        let mut store = Self::new(manifest.fingerprint.clone());
        for _ in 0..manifest.record_count {
            let r = read_record(&mut cursor, manifest.dim)?;
            if store.by_id.contains_key(&r.id) {
                return Err(StoreError::Corrupt(format!("duplicate id {:?}", r.id)));
            }
            store.by_id.insert(r.id.clone(), store.records.len());
            store.records.push(r);
        }
        if (cursor.position() as usize) != bytes.len() {
            return Err(StoreError::Corrupt("trailing bytes after last record".into()));
        }
        Ok(store)
    }

    /// Loads `dir` if it holds a store, otherwise returns an empty one.
    pub fn load_or_new(dir: &Path, fingerprint: &ProviderFingerprint) -> Result<Self, StoreError> {
        if dir.join(MANIFEST_FILE).exists() {
            Self::load(dir, Some(fingerprint))
        } else {
            Ok(Self::new(fingerprint.clone()))
        }
    }

    pub fn read_manifest(dir: &Path) -> Result<StoreManifest, StoreError> {
        let raw = fs::read(dir.join(MANIFEST_FILE))?;
        let manifest: StoreManifest = serde_json::from_slice(&raw).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(StoreError::Version(manifest.format_version));
        }
        if manifest.dim != manifest.fingerprint.dim {
            return Err(StoreError::Corrupt("manifest dim disagrees with fingerprint".into()));
        }
        Ok(manifest)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) -> Result<(), StoreError> {
    let len = u32::try_from(bytes.len()).map_err(|_| StoreError::Corrupt("field too large".into()))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(bytes);
    Ok(())
}

fn write_record(out: &mut Vec<u8>, r: &VectorRecord) -> Result<(), StoreError> {
    put_bytes(out, r.id.as_bytes())?;
    put_bytes(out, r.document.as_bytes())?;
    let meta = serde_json::to_vec(&r.metadata).map_err(|e| StoreError::Corrupt(e.to_string()))?;
    put_bytes(out, &meta)?;
    for v in r.vector.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

fn get_bytes(cur: &mut io::Cursor<&[u8]>) -> Result<Vec<u8>, StoreError> {
    let mut len = [0u8; 4];
    cur.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    let remaining = cur.get_ref().len() - cur.position() as usize;
    if len > remaining {
        return Err(StoreError::Corrupt("field length exceeds file".into()));
    }
    let mut buf = vec![0u8; len];
    cur.read_exact(&mut buf)?;
    Ok(buf)
}

fn get_string(cur: &mut io::Cursor<&[u8]>) -> Result<String, StoreError> {
    String::from_utf8(get_bytes(cur)?).map_err(|_| StoreError::Corrupt("invalid UTF-8".into()))
}

fn read_record(cur: &mut io::Cursor<&[u8]>, dim: usize) -> Result<VectorRecord, StoreError> {
    let id = get_string(cur)?;
    let document = get_string(cur)?;
    let metadata: RecordMetadata =
        serde_json::from_slice(&get_bytes(cur)?).map_err(|e| StoreError::Corrupt(e.to_string()))?;
    let mut values = Vec::with_capacity(dim);
    let mut buf = [0u8; 8];
    for _ in 0..dim {
        cur.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    let vector = EmbeddingVector::new(values).map_err(|e| StoreError::Corrupt(e.to_string()))?;
    Ok(VectorRecord { id, vector, document, metadata })
}
