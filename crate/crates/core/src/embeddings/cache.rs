//! On-disk embedding cache: `index.json` plus `vectors.bin`, a packed array
//! of little-endian `f32` values. Entries are keyed by `(provider_id, source_ref)`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_atomic, write_json};

pub const INDEX_FILE: &str = "index.json";
pub const VECTORS_FILE: &str = "vectors.bin";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    entries: Vec<IndexEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    provider_id: String,
    source_ref: String,
    offset: usize,
    dim: usize,
}

#[derive(Debug, Default)]
struct Inner {
    slots: HashMap<(String, String), (usize, usize)>,
    data: Vec<f32>,
    dirty: bool,
}

/// Thread-safe embedding cache. Reads take a shared lock; inserts are serialized.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    dir: Option<PathBuf>,
    inner: RwLock<Inner>,
}

impl EmbeddingCache {
    /// A cache that never touches the disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// An empty cache bound to `dir`; the next flush replaces whatever is there.
    pub fn create(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            inner: RwLock::default(),
        }
    }

    /// Opens the cache in `dir`, loading existing contents when present.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let index_path = dir.join(INDEX_FILE);
        let mut inner = Inner::default();
        if index_path.exists() {
            let index: IndexFile = crate::io::read_json(&index_path)?;
            if index.version != INDEX_VERSION {
                return Err(Error::Serde(format!(
                    "unsupported cache index version {}",
                    index.version
                )));
            }
            let vectors_path = dir.join(VECTORS_FILE);
            let bytes = fs::read(&vectors_path).map_err(|e| Error::io(&vectors_path, e))?;
            if bytes.len() % 4 != 0 {
                return Err(Error::Serde(format!(
                    "{} is not a whole number of f32 values",
                    vectors_path.display()
                )));
            }
            inner.data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            for e in index.entries {
                if e.offset + e.dim > inner.data.len() {
                    return Err(Error::Serde(format!(
                        "cache entry `{}` points past the end of {VECTORS_FILE}",
                        e.source_ref
                    )));
                }
                inner.slots.insert((e.provider_id, e.source_ref), (e.offset, e.dim));
            }
        }
        Ok(Self {
            dir: Some(dir),
            inner: RwLock::new(inner),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn get(&self, provider_id: &str, source_ref: &str) -> Option<Vec<f32>> {
        let inner = self.inner.read();
        let &(offset, dim) = inner
            .slots
            .get(&(provider_id.to_string(), source_ref.to_string()))?;
        Some(inner.data[offset..offset + dim].to_vec())
    }

    pub fn contains(&self, provider_id: &str, source_ref: &str) -> bool {
        self.inner
            .read()
            .slots
            .contains_key(&(provider_id.to_string(), source_ref.to_string()))
    }

    /// Stores a vector; an existing entry under the same key is replaced.
    pub fn insert(&self, provider_id: &str, source_ref: &str, values: &[f32]) {
        let mut inner = self.inner.write();
        let offset = inner.data.len();
        inner.data.extend_from_slice(values);
        inner.slots.insert(
            (provider_id.to_string(), source_ref.to_string()),
            (offset, values.len()),
        );
        inner.dirty = true;
    }

    pub fn len(&self) -> usize {
        self.inner.read().slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the cache to its directory. Entries are laid out in key order so
    /// identical contents give byte-identical files.
    pub fn flush(&self) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let mut inner = self.inner.write();
        let ordered: BTreeMap<_, _> = inner.slots.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let mut bytes = Vec::with_capacity(inner.data.len() * 4);
        let mut entries = Vec::with_capacity(ordered.len());
        for ((provider_id, source_ref), (offset, dim)) in ordered {
            entries.push(IndexEntry {
                provider_id,
                source_ref,
                offset: bytes.len() / 4,
                dim,
            });
            for v in &inner.data[offset..offset + dim] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join(VECTORS_FILE), &bytes)?;
        write_json(
            &dir.join(INDEX_FILE),
            &IndexFile {
                version: INDEX_VERSION,
                entries,
            },
        )?;
        inner.dirty = false;
        Ok(())
    }

    pub fn is_dirty(&self) -> bool {
        self.inner.read().dirty
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persists_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::open(dir.path()).unwrap();
        let v = vec![0.1f32, -3.25, f32::MIN_POSITIVE, 1e-30];
        cache.insert("p", "emb:a", &v);
        cache.insert("p", "emb:b", &[1.0, 2.0]);
        cache.insert("q", "emb:a", &[9.0]);
        cache.flush().unwrap();

        let reopened = EmbeddingCache::open(dir.path()).unwrap();
        assert_eq!(reopened.len(), 3);
        let got = reopened.get("p", "emb:a").unwrap();
        assert_eq!(
            got.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(reopened.get("q", "emb:a").unwrap(), vec![9.0]);
        assert!(reopened.get("q", "emb:b").is_none());
    }

    #[test]
    fn flush_is_deterministic() {
        let write = |order: &[(&str, f32)]| {
            let dir = tempfile::tempdir().unwrap();
            let cache = EmbeddingCache::open(dir.path()).unwrap();
            for (k, v) in order {
                cache.insert("p", k, &[*v, *v]);
            }
            cache.flush().unwrap();
            (
                fs::read(dir.path().join(INDEX_FILE)).unwrap(),
                fs::read(dir.path().join(VECTORS_FILE)).unwrap(),
            )
        };
        assert_eq!(write(&[("a", 1.0), ("b", 2.0)]), write(&[("b", 2.0), ("a", 1.0)]));
    }
}
