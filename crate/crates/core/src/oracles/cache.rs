//! Disk cache for oracle results, keyed by a content hash of the inputs.
//!
//! Entries are plain JSON files named `<tag>-<hash>.json`, so repeated
//! harness runs skip the expensive tabulations. Loading is best-effort: a
//! missing or unreadable entry just means recomputing.

use std::fs;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct OracleCache {
    dir: Option<PathBuf>,
}

impl OracleCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        OracleCache { dir }
    }

    /// Stable key for a tagged, serializable payload.
    pub fn key<T: Serialize>(&self, tag: &str, payload: &T) -> String {
        let body = serde_json::to_string(payload).expect("cache payload serializes");
        let mut hasher = Sha256::new();
        hasher.update(body.as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        format!("{tag}-{hex}")
    }

    pub fn load<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let body = fs::read_to_string(path).ok()?;
        serde_json::from_str(&body).ok()
    }

    pub fn store<T: Serialize>(&self, key: &str, value: &T) {
        let Some(dir) = &self.dir else { return };
        if fs::create_dir_all(dir).is_err() {
            return;
        }
        let path = dir.join(format!("{key}.json"));
        if let Ok(body) = serde_json::to_string(value) {
            let _ = fs::write(path, body);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_key_stability() {
        let dir = std::env::temp_dir().join(format!("oracle-cache-test-{}", std::process::id()));
        let cache = OracleCache::new(Some(dir.clone()));
        let key = cache.key("unit", &vec![1.0f64, 2.0]);
        assert_eq!(key, cache.key("unit", &vec![1.0f64, 2.0]));
        assert_ne!(key, cache.key("unit", &vec![1.0f64, 3.0]));

        assert!(cache.load::<Vec<f64>>(&key).is_none());
        cache.store(&key, &vec![9.0f64, 8.0]);
        assert_eq!(cache.load::<Vec<f64>>(&key), Some(vec![9.0, 8.0]));
        let _ = std::fs::remove_dir_all(dir);
    }

    #[test]
    fn disabled_cache_is_inert() {
        let cache = OracleCache::new(None);
        let key = cache.key("unit", &1u32);
        cache.store(&key, &1u32);
        assert!(cache.load::<u32>(&key).is_none());
    }
}
