//! Content-addressed response store.
//!
//! One file per response, `<dir>/<sha256-hex>.json`, holding the request
//! body and the raw response body verbatim. The key is the digest of the
//! backend id and the serialized request. Writes go to a temporary file
//! that is renamed into place, so concurrent writers never expose partial
//! entries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub backend: String,
    pub request: Value,
    pub response: String,
    pub response_sha256: String,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(backend: &str, request: &Value) -> String {
        let mut hasher = Sha256::new();
        hasher.update(backend.as_bytes());
        hasher.update(b"\n");
        hasher.update(serde_json::to_vec(request).expect("JSON values serialize"));
        hex::encode(hasher.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Stored raw response for `key`, verified against its recorded digest.
    pub fn get(&self, key: &str) -> Result<Option<String>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let entry: CacheEntry =
            serde_json::from_slice(&bytes).map_err(|_| Error::CacheIntegrity(path.display().to_string()))?;
        if sha256_hex(entry.response.as_bytes()) != entry.response_sha256 {
            return Err(Error::CacheIntegrity(path.display().to_string()));
        }
        Ok(Some(entry.response))
    }

    pub fn put(&self, key: &str, backend: &str, request: &Value, response: &str) -> Result<()> {
        let entry = CacheEntry {
            backend: backend.to_string(),
            request: request.clone(),
            response: response.to_string(),
            response_sha256: sha256_hex(response.as_bytes()),
        };
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec_pretty(&entry).expect("cache entry serializes"))?;
            f.sync_all()?;
            fs::rename(&tmp, self.path_for(key))
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(self.path_for(key), e)
        })
    }

    pub fn len(&self) -> Result<usize> {
        let entries = fs::read_dir(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        Ok(entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
            .count())
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }
}
