//! File cache for backend calls.
//!
//! One file per key under the cache directory; the filename is the hex hash
//! of (operation kind, canonical request JSON, model name) and the body is
//! the response as JSON. Writes go through a temp file and rename so
//! concurrent workers never observe torn entries; a corrupt entry is treated
//! as a miss.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{
    BackendError, GeneralTopicRequest, SpecificTopicRequest, SynonymGroupRequest, TopicBackend,
};

pub struct CachedBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: TopicBackend> CachedBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { inner, dir })
    }

    fn key_path(&self, kind: &str, request_json: &str) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(kind.as_bytes());
        hasher.update(b"\x1f");
        hasher.update(request_json.as_bytes());
        hasher.update(b"\x1f");
        hasher.update(self.inner.model_id().as_bytes());
        let digest = hasher.finalize();
        let mut name = String::with_capacity(digest.len() * 2 + 5);
        for byte in digest {
            name.push_str(&format!("{byte:02x}"));
        }
        name.push_str(".json");
        self.dir.join(name)
    }

    fn cached_call<Req, Resp>(
        &self,
        kind: &str,
        request: &Req,
        fetch: impl FnOnce(&B, &Req) -> Result<Resp, BackendError>,
    ) -> Result<Resp, BackendError>
    where
        Req: Serialize,
        Resp: Serialize + DeserializeOwned,
    {
        let request_json = serde_json::to_string(request).expect("requests serialize");
        let path = self.key_path(kind, &request_json);
        if let Ok(body) = std::fs::read_to_string(&path) {
            if let Ok(hit) = serde_json::from_str::<Resp>(&body) {
                return Ok(hit);
            }
            // Corrupt entry: fall through and refetch.
        }
        let response = fetch(&self.inner, request)?;
        write_atomic(&path, &serde_json::to_string(&response).expect("responses serialize"))?;
        Ok(response)
    }
}

fn write_atomic(path: &Path, body: &str) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, path)
}

impl<B: TopicBackend> TopicBackend for CachedBackend<B> {
    fn extract_general_topic(&self, req: &GeneralTopicRequest) -> Result<String, BackendError> {
        self.cached_call("general", req, |b, r| b.extract_general_topic(r))
    }

    fn extract_specific_topics(&self, req: &SpecificTopicRequest) -> Result<Vec<String>, BackendError> {
        self.cached_call("specific", req, |b, r| b.extract_specific_topics(r))
    }

    fn group_synonyms(&self, req: &SynonymGroupRequest) -> Result<Vec<Vec<String>>, BackendError> {
        self.cached_call("synonyms", req, |b, r| b.group_synonyms(r))
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }
}

#[cfg(test)]
mod tests {
    use super::super::SourceKind;
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Counts underlying calls so hits and misses are observable.
    struct CountingBackend {
        calls: Arc<AtomicUsize>,
        model: String,
    }

    impl TopicBackend for CountingBackend {
        fn extract_general_topic(&self, _: &GeneralTopicRequest) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok("Hydrating Serum".into())
        }

        fn extract_specific_topics(
            &self,
            _: &SpecificTopicRequest,
        ) -> Result<Vec<String>, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(vec!["hydrating".into()])
        }

        fn group_synonyms(&self, _: &SynonymGroupRequest) -> Result<Vec<Vec<String>>, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(vec![vec!["a".into()]])
        }

        fn model_id(&self) -> &str {
            &self.model
        }
    }

    fn counting(calls: Arc<AtomicUsize>, model: &str) -> CountingBackend {
        CountingBackend { calls, model: model.to_string() }
    }

    fn request() -> SpecificTopicRequest {
        SpecificTopicRequest { text: "so hydrating".into(), source_kind: SourceKind::Review }
    }

    #[test]
    fn second_identical_request_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let cached = CachedBackend::new(counting(calls.clone(), "m"), dir.path()).unwrap();
        cached.extract_specific_topics(&request()).unwrap();
        cached.extract_specific_topics(&request()).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn cleared_cache_refetches() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let cached = CachedBackend::new(counting(calls.clone(), "m"), dir.path()).unwrap();
        cached.extract_specific_topics(&request()).unwrap();
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            std::fs::remove_file(entry.unwrap().path()).unwrap();
        }
        cached.extract_specific_topics(&request()).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn model_name_changes_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let a = CachedBackend::new(counting(calls.clone(), "model-a"), dir.path()).unwrap();
        let b = CachedBackend::new(counting(calls.clone(), "model-b"), dir.path()).unwrap();
        a.extract_specific_topics(&request()).unwrap();
        b.extract_specific_topics(&request()).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn corrupt_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let cached = CachedBackend::new(counting(calls.clone(), "m"), dir.path()).unwrap();
        cached.extract_specific_topics(&request()).unwrap();
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            std::fs::write(entry.unwrap().path(), "{not json").unwrap();
        }
        let got = cached.extract_specific_topics(&request()).unwrap();
        assert_eq!(got, vec!["hydrating".to_string()]);
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn different_kinds_do_not_collide() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let cached = CachedBackend::new(counting(calls.clone(), "m"), dir.path()).unwrap();
        cached.extract_specific_topics(&request()).unwrap();
        cached
            .group_synonyms(&SynonymGroupRequest { words: vec![("a".into(), 1)] })
            .unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }
}
