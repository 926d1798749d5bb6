//! Fingerprint cache: one JSON document holding computed class lists,
//! keyed by module content hash and bound. A version mismatch or any
//! parse failure silently yields an empty cache (recompute, then
//! overwrite); writes go through a sibling temp file and a rename.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const CACHE_VERSION: u64 = 1;
pub const CACHE_ENV_VAR: &str = "PROFINITE_CACHE";

#[derive(Serialize, Deserialize)]
struct CacheData {
    version: u64,
    entries: BTreeMap<String, CachedFingerprint>,
}

#[derive(Clone, Serialize, Deserialize)]
pub struct CachedFingerprint {
    pub bound: u64,
    pub classes: Vec<String>,
}

pub struct FingerprintCache {
    path: Option<PathBuf>,
    data: CacheData,
    dirty: bool,
}

fn key(hash: &str, bound: u64) -> String {
    format!("{hash}:{bound}")
}

impl FingerprintCache {
    pub fn disabled() -> FingerprintCache {
        FingerprintCache {
            path: None,
            data: CacheData { version: CACHE_VERSION, entries: BTreeMap::new() },
            dirty: false,
        }
    }

    pub fn open(path: &Path) -> FingerprintCache {
        let data = fs::read_to_string(path)
            .ok()
            .and_then(|text| serde_json::from_str::<CacheData>(&text).ok())
            .filter(|d| d.version == CACHE_VERSION)
            .unwrap_or(CacheData { version: CACHE_VERSION, entries: BTreeMap::new() });
        FingerprintCache { path: Some(path.to_path_buf()), data, dirty: false }
    }

    pub fn get(&self, hash: &str, bound: u64) -> Option<&CachedFingerprint> {
        self.data.entries.get(&key(hash, bound)).filter(|e| e.bound == bound)
    }

    pub fn put(&mut self, hash: &str, bound: u64, classes: Vec<String>) {
        if self.path.is_none() {
            return;
        }
        self.data
            .entries
            .insert(key(hash, bound), CachedFingerprint { bound, classes });
        self.dirty = true;
    }

    /// Atomic write: serialize next to the target, then rename over it.
    pub fn save(&mut self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if !self.dirty {
            return Ok(());
        }
        let text = serde_json::to_string_pretty(&self.data)? + "\n";
        let mut tmp = path.clone();
        tmp.set_extension("tmp");
        fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
        self.dirty = false;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_version_gate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp-cache.json");
        let mut c = FingerprintCache::open(&path);
        assert!(c.get("abc", 10).is_none());
        c.put("abc", 10, vec!["()".to_string(), "(2)".to_string()]);
        c.save().unwrap();
        let c2 = FingerprintCache::open(&path);
        assert_eq!(c2.get("abc", 10).unwrap().classes, vec!["()", "(2)"]);
        assert!(c2.get("abc", 11).is_none());
        // A bumped version field invalidates silently.
        let text = fs::read_to_string(&path).unwrap().replace("\"version\": 1", "\"version\": 99");
        fs::write(&path, text).unwrap();
        let c3 = FingerprintCache::open(&path);
        assert!(c3.get("abc", 10).is_none());
        // Corrupt JSON also yields an empty cache.
        fs::write(&path, "not json").unwrap();
        let c4 = FingerprintCache::open(&path);
        assert!(c4.get("abc", 10).is_none());
    }

    #[test]
    fn disabled_cache_stores_nothing() {
        let mut c = FingerprintCache::disabled();
        c.put("abc", 10, vec!["()".to_string()]);
        assert!(c.get("abc", 10).is_none());
        c.save().unwrap();
    }
}
