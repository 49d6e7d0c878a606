//! Content-addressed raw-record cache: `cache/<digest[0..2]>/<digest>.json`
//! plus `cache/index.json` mapping each source id to its latest entry.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use kgforge_core::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache I/O at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt cache index {path}: {message}")]
    CorruptIndex { path: PathBuf, message: String },
    #[error("cached payload for {source_id} does not match digest {digest}")]
    DigestMismatch { source_id: String, digest: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub source_id: String,
    pub submission_date: NaiveDate,
    /// SHA-256 of the stored bytes, lowercase hex.
    pub content_digest: String,
    /// Relative to the cache root.
    pub payload_path: String,
    pub fetched_at: DateTime<Utc>,
    /// Change marker reported by the source listing, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modified: Option<String>,
}

#[derive(Debug)]
pub struct Cache {
    root: PathBuf,
    index: BTreeMap<String, CacheEntry>,
    dirty: bool,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CacheError + '_ {
    move |source| CacheError::Io { path: path.to_path_buf(), source }
}

/// Writes through a temporary file and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

impl Cache {
    pub fn open(root: &Path) -> Result<Self, CacheError> {
        let index_path = root.join("index.json");
        let index = match std::fs::read(&index_path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| CacheError::CorruptIndex {
                path: index_path.clone(),
                message: e.to_string(),
            })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(io_err(&index_path)(e)),
        };
        Ok(Cache { root: root.to_path_buf(), index, dirty: false })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, source_id: &str) -> Option<&CacheEntry> {
        self.index.get(source_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CacheEntry> {
        self.index.values()
    }

    /// Reads the stored bytes and checks them against the entry's digest.
    pub fn read_verified(&self, entry: &CacheEntry) -> Result<Vec<u8>, CacheError> {
        let path = self.root.join(&entry.payload_path);
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&bytes) != entry.content_digest {
            return Err(CacheError::DigestMismatch {
                source_id: entry.source_id.clone(),
                digest: entry.content_digest.clone(),
            });
        }
        Ok(bytes)
    }

    /// Stores `bytes` under their digest and points `source_id` at them.
    /// An identical existing entry is kept as is, including its timestamp.
    pub fn store(
        &mut self,
        source_id: &str,
        submission_date: NaiveDate,
        bytes: &[u8],
        modified: Option<String>,
        fetched_at: DateTime<Utc>,
    ) -> Result<CacheEntry, CacheError> {
        let digest = sha256_hex(bytes);
        if let Some(e) = self.index.get(source_id) {
            if e.content_digest == digest && e.submission_date == submission_date && e.modified == modified {
                return Ok(e.clone());
            }
        }
        let rel = format!("{}/{digest}.json", &digest[..2]);
        let path = self.root.join(&rel);
        if !path.exists() {
            write_atomic(&path, bytes).map_err(io_err(&path))?;
        }
        let entry = CacheEntry {
            source_id: source_id.to_string(),
            submission_date,
            content_digest: digest,
            payload_path: rel,
            fetched_at,
            modified,
        };
        self.index.insert(source_id.to_string(), entry.clone());
        self.dirty = true;
        Ok(entry)
    }

    pub fn save(&mut self) -> Result<(), CacheError> {
        if !self.dirty {
            return Ok(());
        }
        let path = self.root.join("index.json");
        let text = serde_json::to_vec_pretty(&self.index).expect("index serializes");
        write_atomic(&path, &text).map_err(io_err(&path))?;
        self.dirty = false;
        Ok(())
    }
}
