//! Content-addressed result store.
//!
//! Records are keyed by a SHA-256 fingerprint of everything that
//! determines the result: a task label, the problem parameters, and
//! fingerprints of the grid and tolerance sections. Identical inputs
//! therefore map to the same record, and any change to discretization
//! or tolerances changes the address instead of overwriting history.
//!
//! Every file carries a checksum of its own payload, so corruption is
//! detected on read and the record is recomputed — a damaged entry is
//! never silently used. Writes go through a temporary file in the same
//! directory followed by an atomic rename, so concurrent workers and
//! interrupted runs cannot leave a partial record at a live address.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of a byte string.
pub fn digest_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Short fingerprint of any serializable value under a label. Used for
/// the grid and tolerance hashes recorded in report provenance.
pub fn fingerprint<T: Serialize>(label: &str, value: &T) -> String {
    let body = serde_json::to_string(value).expect("fingerprint serialization");
    digest_hex(format!("{label}|{body}").as_bytes())[..16].to_string()
}

/// Content address of one record: label + parameters + section hashes.
pub fn record_key<T: Serialize>(label: &str, data: &T, grid_hash: &str, tol_hash: &str) -> String {
    let body = serde_json::to_string(data).expect("record key serialization");
    digest_hex(format!("{label}|{body}|{grid_hash}|{tol_hash}").as_bytes())
}

/// A directory of checksummed records, or a disabled stand-in that
/// misses every read and drops every write.
#[derive(Debug, Clone)]
pub struct Cache {
    root: Option<PathBuf>,
}

impl Cache {
    pub fn open(root: PathBuf) -> std::io::Result<Self> {
        std::fs::create_dir_all(&root)?;
        Ok(Cache { root: Some(root) })
    }

    pub fn disabled() -> Self {
        Cache { root: None }
    }

    pub fn is_enabled(&self) -> bool {
        self.root.is_some()
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn path_of(&self, key: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(format!("{key}.json")))
    }

    /// Read a record. Any failure — missing file, checksum mismatch,
    /// undecodable payload — reads as a miss, so the caller recomputes.
    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let path = self.path_of(key)?;
        let text = std::fs::read_to_string(path).ok()?;
        let (checksum, payload) = text.split_once('\n')?;
        if digest_hex(payload.as_bytes()) != checksum {
            return None;
        }
        serde_json::from_str(payload).ok()
    }

    /// Write a record atomically. A no-op when the cache is disabled.
    pub fn put<T: Serialize>(&self, key: &str, value: &T) -> std::io::Result<()> {
        let Some(root) = &self.root else {
            return Ok(());
        };
        let payload = serde_json::to_string(value)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let mut file = tempfile::NamedTempFile::new_in(root)?;
        file.write_all(digest_hex(payload.as_bytes()).as_bytes())?;
        file.write_all(b"\n")?;
        file.write_all(payload.as_bytes())?;
        file.flush()?;
        file.persist(root.join(format!("{key}.json")))
            .map_err(|e| e.error)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
    struct Rec {
        name: String,
        values: Vec<f64>,
    }

    fn sample() -> Rec {
        Rec {
            name: "probe".into(),
            values: vec![1.0, -0.25, 3.5e-9],
        }
    }

    #[test]
    fn records_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path().to_path_buf()).unwrap();
        let key = record_key("test", &sample(), "g", "t");
        assert!(cache.get::<Rec>(&key).is_none());
        cache.put(&key, &sample()).unwrap();
        assert_eq!(cache.get::<Rec>(&key).unwrap(), sample());
    }

    #[test]
    fn corruption_is_detected_and_reads_as_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path().to_path_buf()).unwrap();
        let key = record_key("test", &sample(), "g", "t");
        cache.put(&key, &sample()).unwrap();

        let path = dir.path().join(format!("{key}.json"));
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 2;
        bytes[last] = bytes[last].wrapping_add(1);
        std::fs::write(&path, &bytes).unwrap();

        assert!(cache.get::<Rec>(&key).is_none());
        // a rewrite repairs the address
        cache.put(&key, &sample()).unwrap();
        assert_eq!(cache.get::<Rec>(&key).unwrap(), sample());
    }

    #[test]
    fn writes_leave_no_temporaries_behind() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path().to_path_buf()).unwrap();
        for i in 0..5 {
            let key = record_key("test", &i, "g", "t");
            cache.put(&key, &sample()).unwrap();
        }
        let stray = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                let name = e.as_ref().unwrap().file_name();
                !name.to_string_lossy().ends_with(".json")
            })
            .count();
        assert_eq!(stray, 0);
    }

    #[test]
    fn distinct_inputs_get_distinct_addresses() {
        let a = record_key("groundstate", &(3, 4.0, 100.0), "g", "t");
        let b = record_key("groundstate", &(3, 4.0, 100.1), "g", "t");
        let c = record_key("groundstate", &(3, 4.0, 100.0), "g2", "t");
        let d = record_key("spectrum", &(3, 4.0, 100.0), "g", "t");
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn disabled_cache_misses_and_swallows_writes() {
        let cache = Cache::disabled();
        cache.put("k", &sample()).unwrap();
        assert!(cache.get::<Rec>("k").is_none());
    }
}
