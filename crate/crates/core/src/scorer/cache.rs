//! Persistent score cache: append-only JSONL keyed by content hash.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCacheEntry {
    pub key: String,
    pub value: f64,
    /// Unix seconds at insertion; informational only.
    pub timestamp: u64,
}

/// Deterministic cache key over everything that determines a judge score.
/// The template version string makes prompt edits invalidate old entries.
pub fn cache_key(feature: &str, template_version: &str, context: &str, candidate: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [feature, template_version, context, candidate] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    crate::schema::hex_digest(&hasher.finalize())
}

/// Short content version of a prompt template.
pub fn template_version(template: &str) -> String {
    let digest = Sha256::digest(template.as_bytes());
    crate::schema::hex_digest(&digest)[..16].to_string()
}

/// In-memory map backed by an optional append-only JSONL file.
///
/// Concurrent reads and inserts of distinct keys are safe; racing inserts of
/// the same key write identical values, so last-write-wins is benign.
#[derive(Debug)]
pub struct ScoreCache {
    map: Mutex<HashMap<String, f64>>,
    sink: Mutex<Option<File>>,
    path: Option<PathBuf>,
}

impl ScoreCache {
    /// Ephemeral in-memory cache.
    pub fn in_memory() -> Self {
        ScoreCache {
            map: Mutex::new(HashMap::new()),
            sink: Mutex::new(None),
            path: None,
        }
    }

    /// Loads existing entries from `path` (if present) and appends new ones.
    pub fn persistent(path: &Path) -> Result<Self> {
        let mut map = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                // Tolerate a torn trailing line from an interrupted run.
                if let Ok(entry) = serde_json::from_str::<ScoreCacheEntry>(&line) {
                    map.insert(entry.key, entry.value);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ScoreCache {
            map: Mutex::new(map),
            sink: Mutex::new(Some(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.map.lock().unwrap().get(key).copied()
    }

    pub fn insert(&self, key: String, value: f64) -> Result<()> {
        self.map.lock().unwrap().insert(key.clone(), value);
        let mut sink = self.sink.lock().unwrap();
        if let Some(file) = sink.as_mut() {
            let entry = ScoreCacheEntry {
                key,
                value,
                timestamp: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            };
            let line = serde_json::to_string(&entry).expect("entry serializes");
            file.write_all(line.as_bytes())?;
            file.write_all(b"\n")?;
            file.flush()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_deterministic_and_input_sensitive() {
        let a = cache_key("relevance", "v1", "ctx", "cand");
        let b = cache_key("relevance", "v1", "ctx", "cand");
        assert_eq!(a, b);
        assert_ne!(a, cache_key("relevance", "v2", "ctx", "cand"));
        assert_ne!(a, cache_key("conciseness", "v1", "ctx", "cand"));
        // Field boundaries matter: ("ab", "c") != ("a", "bc").
        assert_ne!(
            cache_key("f", "v", "ab", "c"),
            cache_key("f", "v", "a", "bc")
        );
    }

    #[test]
    fn persists_and_reloads_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.cache.jsonl");
        {
            let cache = ScoreCache::persistent(&path).unwrap();
            cache.insert("k1".into(), 4.25).unwrap();
            cache.insert("k2".into(), 0.5).unwrap();
        }
        let reloaded = ScoreCache::persistent(&path).unwrap();
        assert_eq!(reloaded.get("k1"), Some(4.25));
        assert_eq!(reloaded.get("k2"), Some(0.5));
        assert_eq!(reloaded.get("missing"), None);
        assert_eq!(reloaded.len(), 2);
    }

    #[test]
    fn tolerates_torn_trailing_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.cache.jsonl");
        {
            let cache = ScoreCache::persistent(&path).unwrap();
            cache.insert("k1".into(), 3.0).unwrap();
        }
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(b"{\"key\":\"k2\",\"va");
        std::fs::write(&path, bytes).unwrap();
        let reloaded = ScoreCache::persistent(&path).unwrap();
        assert_eq!(reloaded.get("k1"), Some(3.0));
        assert_eq!(reloaded.len(), 1);
    }

    #[test]
    fn concurrent_inserts_of_distinct_keys() {
        let cache = std::sync::Arc::new(ScoreCache::in_memory());
        std::thread::scope(|scope| {
            for t in 0..4 {
                let cache = cache.clone();
                scope.spawn(move || {
                    for i in 0..50 {
                        cache.insert(format!("t{t}-k{i}"), i as f64).unwrap();
                    }
                });
            }
        });
        assert_eq!(cache.len(), 200);
    }
}
