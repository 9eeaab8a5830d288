//! Append-only JSON-lines result cache keyed by content hash.
//!
//! One record per line: `{"key": <hex>, "created_unix": ..., "engine_version":
//! ..., "payload": { ... }}`. The key is the SHA-256 of the canonical JSON
//! of the job description, so identical jobs always hit the same record.
//! Records are never rewritten; a warm cache must reproduce a cold run
//! byte for byte, which `--verify-cache` spot-checks by recomputing.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub created_unix: u64,
    pub engine_version: String,
    pub payload: Value,
}

pub struct Cache {
    path: PathBuf,
}

impl Cache {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Cache {
            path: dir.join("results.jsonl"),
        })
    }

    /// Canonical key for a job: schema version plus the full job
    /// description, hashed over canonical JSON (sorted keys via the
    /// serde_json BTreeMap representation of the description).
    pub fn job_key(description: &Value) -> String {
        let canonical = serde_json::to_string(description).expect("serializable");
        let mut hasher = Sha256::new();
        hasher.update(format!("v{SCHEMA_VERSION}:"));
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn lookup(&self, key: &str) -> Option<CacheRecord> {
        let content = fs::read_to_string(&self.path).ok()?;
        for line in content.lines() {
            if let Ok(rec) = serde_json::from_str::<CacheRecord>(line) {
                if rec.key == key {
                    return Some(rec);
                }
            }
        }
        None
    }

    pub fn append(&self, key: &str, payload: &Value) -> std::io::Result<()> {
        let rec = CacheRecord {
            key: key.to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            payload: payload.clone(),
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let line = serde_json::to_string(&rec)?;
        writeln!(file, "{line}")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trip_and_key_stability() {
        let dir = std::env::temp_dir().join(format!("respair-cache-test-{}", std::process::id()));
        let cache = Cache::new(&dir).unwrap();
        let desc = json!({"command": "pair", "n": 2, "d": 1, "g": 2, "eta": {"a": {"2": 1}}});
        let key = Cache::job_key(&desc);
        assert_eq!(key, Cache::job_key(&desc), "key must be deterministic");
        assert!(cache.lookup(&key).is_none());
        let payload = json!({"value": {"num": "-2", "den": "1"}});
        cache.append(&key, &payload).unwrap();
        let hit = cache.lookup(&key).unwrap();
        assert_eq!(hit.payload, payload);
        fs::remove_dir_all(&dir).ok();
    }
}
