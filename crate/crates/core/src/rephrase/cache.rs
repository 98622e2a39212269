use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{RephraseRecord, RephraseScheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub doc_id: String,
    pub scheme: RephraseScheme,
    pub provider_id: String,
    pub original_sha256: String,
}

impl CacheKey {
    pub fn new(doc_id: &str, scheme: RephraseScheme, provider_id: &str, original: &str) -> Self {
        CacheKey {
            doc_id: doc_id.to_owned(),
            scheme,
            provider_id: provider_id.to_owned(),
            original_sha256: hex::encode(Sha256::digest(original.as_bytes())),
        }
    }

    fn of(record: &RephraseRecord) -> Self {
        CacheKey::new(&record.doc_id, record.scheme, &record.provider_id, &record.original)
    }
}

struct Inner {
    entries: HashMap<CacheKey, RephraseRecord>,
    writer: Option<BufWriter<File>>,
}

/// Append-only JSONL store of successful responses.
///
/// Reads and writes go through one lock, so concurrent workers never
/// interleave partial lines. The file is only appended to; a key written
/// twice keeps its first record.
pub struct RephraseCache {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl RephraseCache {
    pub fn in_memory() -> Self {
        RephraseCache {
            path: None,
            inner: Mutex::new(Inner {
                entries: HashMap::new(),
                writer: None,
            }),
        }
    }

    /// Opens (creating if needed) a cache file and loads its records.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let mut record: RephraseRecord =
                    serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                        line: i + 1,
                        reason: format!("{}: {e}", path.display()),
                    })?;
                record.from_cache = false;
                entries.entry(CacheKey::of(&record)).or_insert(record);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(RephraseCache {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(Inner {
                entries,
                writer: Some(BufWriter::new(file)),
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The stored record for `key`, marked `from_cache`.
    pub fn get(&self, key: &CacheKey) -> Option<RephraseRecord> {
        let inner = self.inner.lock().unwrap();
        inner.entries.get(key).map(|r| RephraseRecord {
            from_cache: true,
            ..r.clone()
        })
    }

    /// Stores a fresh record and appends it to the file. Returns false if
    /// the key was already present.
    pub fn insert(&self, record: &RephraseRecord) -> Result<bool> {
        let key = CacheKey::of(record);
        let mut inner = self.inner.lock().unwrap();
        if inner.entries.contains_key(&key) {
            return Ok(false);
        }
        let stored = RephraseRecord {
            from_cache: false,
            ..record.clone()
        };
        if let Some(writer) = inner.writer.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new("<cache>"));
            let line = serde_json::to_string(&stored)?;
            writer
                .write_all(line.as_bytes())
                .and_then(|_| writer.write_all(b"\n"))
                .and_then(|_| writer.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        inner.entries.insert(key, stored);
        Ok(true)
    }
}
