//! Content-addressed JSON store shared by the generation and entailment caches.
//!
//! Layout: `<root>/<first two hex chars of key>/<key>.json`. Writes go to a
//! temporary file in the target directory and are renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache entry {path} is corrupt: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("cache I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn content_key<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("cache key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone)]
pub struct ContentStore {
    root: PathBuf,
}

impl ContentStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        let prefix = key.get(..2).unwrap_or(key);
        self.root.join(prefix).join(format!("{key}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CacheError> {
        let path = self.entry_path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => {
                return Err(CacheError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| CacheError::Corrupt {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
    }

    pub fn put<T: Serialize>(&self, key: &str, value: &T) -> Result<(), CacheError> {
        let path = self.entry_path(key);
        let dir = path.parent().expect("entry has a parent");
        let io_err = |source| CacheError::Io {
            path: path.display().to_string(),
            source,
        };
        fs::create_dir_all(dir).map_err(io_err)?;
        let mut bytes = serde_json::to_vec_pretty(value).expect("cache value serializes");
        bytes.push(b'\n');
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
        tmp.write_all(&bytes).map_err(io_err)?;
        tmp.persist(&path).map_err(|e| io_err(e.error))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = ContentStore::new(dir.path());
        let key = content_key(&("a", 1));
        assert_eq!(store.get::<String>(&key).unwrap(), None);
        store.put(&key, &"hello\u{2014}world".to_string()).unwrap();
        assert_eq!(
            store.get::<String>(&key).unwrap().as_deref(),
            Some("hello\u{2014}world")
        );
        assert!(store.entry_path(&key).starts_with(dir.path().join(&key[..2])));
    }

    #[test]
    fn corrupt_entry_named() {
        let dir = tempfile::tempdir().unwrap();
        let store = ContentStore::new(dir.path());
        let key = content_key("x");
        let path = store.entry_path(&key);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, b"{not json").unwrap();
        let err = store.get::<String>(&key).unwrap_err();
        assert!(err.to_string().contains(&key), "{err}");
    }

    #[test]
    fn keys_are_stable() {
        assert_eq!(content_key("abc"), content_key("abc"));
        assert_ne!(content_key(&("abc", 0)), content_key(&("abc", 1)));
        assert_eq!(content_key("abc").len(), 64);
    }
}
