use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

fn serde_err(e: serde_json::Error) -> Error {
    Error::Serde(e.to_string())
}

/// `serde_json::Value` keeps object keys sorted, so this is canonical
/// regardless of field or map order in the input.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(serde_err)?;
    serde_json::to_string(&v).map_err(serde_err)
}

/// Hex SHA-256 of the stage name and the canonical serialization of `config`.
pub fn cache_key<T: Serialize + ?Sized>(config: &T, stage: &str) -> Result<String> {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0u8]);
    h.update(canonical_json(config)?.as_bytes());
    Ok(hex::encode(h.finalize()))
}

/// A directory of JSON files named by cache key.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match std::fs::read_to_string(self.path(key)) {
            Ok(text) => Ok(Some(serde_json::from_str(&text).map_err(serde_err)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put<T: Serialize>(&self, key: &str, value: &T) -> Result<()> {
        let tmp = self.dir.join(format!("{key}.tmp"));
        std::fs::write(&tmp, serde_json::to_string(value).map_err(serde_err)?)?;
        std::fs::rename(tmp, self.path(key))?;
        Ok(())
    }

    /// Cached value for `key`, computing and storing it on a miss.
    pub fn get_or_compute<T, F>(&self, key: &str, compute: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.get(key)? {
            return Ok(v);
        }
        let v = compute()?;
        self.put(key, &v)?;
        Ok(v)
    }
}

/// Runs `compute` through `cache` when one is given.
pub fn cached<T, F>(cache: Option<&Cache>, key: &str, compute: F) -> Result<T>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce() -> Result<T>,
{
    match cache {
        Some(c) => c.get_or_compute(key, compute),
        None => compute(),
    }
}
