use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::vecstore::write_atomic;

pub const CURSOR_FILE: &str = "cursor.json";

/// Sync position within one table.
///
/// Timestamps have one-second resolution, so a row can be ingested or
/// updated in the same second as the last synced one. Alongside the newest
/// synced timestamp the cursor keeps every `(row_key, row_hash)` synced at
/// exactly that second; a row at that second is selected unless its pair is
/// in the set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCursor {
    pub at: Option<Timestamp>,
    pub seen_at: BTreeSet<(String, String)>,
}

impl TableCursor {
    pub fn selects(&self, ingested_at: Timestamp, row_key: &str, row_hash: &str) -> bool {
        match self.at {
            None => true,
            Some(at) if ingested_at > at => true,
            Some(at) if ingested_at == at => !self.seen_at.contains(&(row_key.to_owned(), row_hash.to_owned())),
            Some(_) => false,
        }
    }

    /// Folds in rows that were synced successfully.
    pub fn advance<'a>(&mut self, synced: impl IntoIterator<Item = (Timestamp, &'a str, &'a str)>) {
        for (ts, key, hash) in synced {
            match self.at {
                Some(at) if ts < at => {}
                Some(at) if ts == at => {
                    self.seen_at.insert((key.to_owned(), hash.to_owned()));
                }
                _ => {
                    self.at = Some(ts);
                    self.seen_at.clear();
                    self.seen_at.insert((key.to_owned(), hash.to_owned()));
                }
            }
        }
    }
}

/// Per-table sync positions, persisted next to the vector store.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCursor {
    pub tables: BTreeMap<String, TableCursor>,
}

impl IngestCursor {
    pub fn table(&self, name: &str) -> TableCursor {
        self.tables.get(name).cloned().unwrap_or_default()
    }

    pub fn load(store_dir: &Path) -> std::io::Result<Self> {
        match std::fs::read(store_dir.join(CURSOR_FILE)) {
            Ok(bytes) => {
                serde_json::from_slice(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e),
        }
    }

    pub fn persist(&self, store_dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(store_dir)?;
        let json = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        write_atomic(&store_dir.join(CURSOR_FILE), &json)
    }
}
