//! Resumable progress files for backend-driven stages.
//!
//! A checkpoint is JSON on disk: a fingerprint of the stage's input plus the
//! stage-specific progress payload. Loading with a different fingerprint
//! discards stale progress instead of misapplying it.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<T> {
    fingerprint: String,
    progress: T,
}

/// Progress of one stage, persisted after each unit of work.
#[derive(Debug)]
pub struct Checkpoint<T> {
    path: Option<PathBuf>,
    fingerprint: String,
    pub progress: T,
}

impl<T: Serialize + DeserializeOwned + Default> Checkpoint<T> {
    /// In-memory checkpoint that never touches disk.
    pub fn ephemeral() -> Self {
        Self { path: None, fingerprint: String::new(), progress: T::default() }
    }

    /// Load existing progress when the fingerprint matches; otherwise start
    /// fresh. A missing or unreadable file also starts fresh.
    pub fn load_or_new(path: &Path, fingerprint: String) -> Self {
        let progress = std::fs::read_to_string(path)
            .ok()
            .and_then(|text| serde_json::from_str::<Envelope<T>>(&text).ok())
            .filter(|env| env.fingerprint == fingerprint)
            .map(|env| env.progress)
            .unwrap_or_default();
        Self { path: Some(path.to_path_buf()), fingerprint, progress }
    }

    pub fn save(&self) -> std::io::Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let envelope = Envelope { fingerprint: self.fingerprint.clone(), progress: &self.progress };
        let body = serde_json::to_string(&envelope).expect("progress serializes");
        let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
        std::fs::write(&tmp, body)?;
        std::fs::rename(&tmp, path)
    }
}

/// Hex SHA-256 of a byte slice, used as checkpoint fingerprints.
pub fn fingerprint(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    type Progress = BTreeMap<String, Vec<String>>;

    #[test]
    fn round_trips_matching_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let mut ck: Checkpoint<Progress> = Checkpoint::load_or_new(&path, "fp1".into());
        ck.progress.insert("leaf".into(), vec!["done".into()]);
        ck.save().unwrap();
        let again: Checkpoint<Progress> = Checkpoint::load_or_new(&path, "fp1".into());
        assert_eq!(again.progress.get("leaf").map(|v| v.len()), Some(1));
    }

    #[test]
    fn stale_fingerprint_starts_fresh() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let mut ck: Checkpoint<Progress> = Checkpoint::load_or_new(&path, "fp1".into());
        ck.progress.insert("leaf".into(), vec!["done".into()]);
        ck.save().unwrap();
        let fresh: Checkpoint<Progress> = Checkpoint::load_or_new(&path, "fp2".into());
        assert!(fresh.progress.is_empty());
    }
}
