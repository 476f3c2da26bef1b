//! Pluggable text-understanding backend.
//!
//! Three operations: general-topic extraction (one subtype per item),
//! specific-topic extraction (words per context document), and synonym
//! grouping. One HTTP chat-completions client and one deterministic mock
//! implement the trait; a file cache wraps either.

mod cache;
mod http;
mod mock;
mod prompts;

pub use cache::CachedBackend;
pub use http::HttpBackend;
pub use mock::MockBackend;
pub use prompts::PromptTemplates;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("API key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Request for one general topic (Subtype) for an item under its leaf type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralTopicRequest {
    pub item_title: String,
    /// Root-to-leaf type labels; never empty.
    pub type_path: Vec<String>,
    pub description: Option<String>,
    /// Subtype labels already accumulated under this leaf, in extraction order.
    pub current_tree: Vec<String>,
}

/// Which kind of context document a specific-topic request carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Description,
    Review,
}

/// Request for specific topics (Words) from one context document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecificTopicRequest {
    pub text: String,
    pub source_kind: SourceKind,
}

/// Request to group candidate words with the same meaning. Frequencies feed
/// the canonical-label choice downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymGroupRequest {
    pub words: Vec<(String, u64)>,
}

/// Connection and behavior settings for the HTTP backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_parallel: usize,
    pub cache_dir: Option<PathBuf>,
    /// Cap on specific topics returned per document.
    pub max_words: usize,
    /// Optional directory with general.txt / specific.txt / synonyms.txt
    /// overriding the built-in prompt templates.
    pub prompt_dir: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-4o-mini".to_string(),
            api_key_env: "TOPIC_BACKEND_API_KEY".to_string(),
            timeout_secs: 30,
            max_retries: 3,
            max_parallel: 8,
            cache_dir: None,
            max_words: 10,
            prompt_dir: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.timeout_secs == 0 {
            return Err(BackendError::InvalidRequest("timeout must be positive".into()));
        }
        if self.max_parallel == 0 {
            return Err(BackendError::InvalidRequest("max_parallel must be positive".into()));
        }
        Ok(())
    }
}

/// The three prompt contracts. Implementations must be callable concurrently;
/// responses are immutable values.
pub trait TopicBackend: Send + Sync {
    /// One normalized subtype label. May repeat an element of
    /// `current_tree`; the caller dedups.
    fn extract_general_topic(&self, req: &GeneralTopicRequest) -> Result<String, BackendError>;

    /// Duplicate-free normalized word labels, at most the configured cap.
    fn extract_specific_topics(&self, req: &SpecificTopicRequest) -> Result<Vec<String>, BackendError>;

    /// Groups that partition the request's labels. Callers run
    /// [`repair_partition`] on the result before trusting it.
    fn group_synonyms(&self, req: &SynonymGroupRequest) -> Result<Vec<Vec<String>>, BackendError>;

    /// Identity folded into cache keys, so models never share entries.
    fn model_id(&self) -> &str;
}

impl<T: TopicBackend + ?Sized> TopicBackend for std::sync::Arc<T> {
    fn extract_general_topic(&self, req: &GeneralTopicRequest) -> Result<String, BackendError> {
        (**self).extract_general_topic(req)
    }

    fn extract_specific_topics(&self, req: &SpecificTopicRequest) -> Result<Vec<String>, BackendError> {
        (**self).extract_specific_topics(req)
    }

    fn group_synonyms(&self, req: &SynonymGroupRequest) -> Result<Vec<Vec<String>>, BackendError> {
        (**self).group_synonyms(req)
    }

    fn model_id(&self) -> &str {
        (**self).model_id()
    }
}

impl<T: TopicBackend + ?Sized> TopicBackend for &T {
    fn extract_general_topic(&self, req: &GeneralTopicRequest) -> Result<String, BackendError> {
        (**self).extract_general_topic(req)
    }

    fn extract_specific_topics(&self, req: &SpecificTopicRequest) -> Result<Vec<String>, BackendError> {
        (**self).extract_specific_topics(req)
    }

    fn group_synonyms(&self, req: &SynonymGroupRequest) -> Result<Vec<Vec<String>>, BackendError> {
        (**self).group_synonyms(req)
    }

    fn model_id(&self) -> &str {
        (**self).model_id()
    }
}

fn validate_general(req: &GeneralTopicRequest) -> Result<(), BackendError> {
    if req.type_path.is_empty() {
        return Err(BackendError::InvalidRequest("type_path must be non-empty".into()));
    }
    Ok(())
}

fn validate_specific(req: &SpecificTopicRequest) -> Result<(), BackendError> {
    if crate::label::normalize(&req.text).is_none() {
        return Err(BackendError::EmptyText);
    }
    Ok(())
}

fn validate_synonyms(req: &SynonymGroupRequest) -> Result<(), BackendError> {
    if req.words.is_empty() {
        return Err(BackendError::InvalidRequest("word list must be non-empty".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for (label, _) in &req.words {
        if !seen.insert(label.as_str()) {
            return Err(BackendError::InvalidRequest(format!("duplicate label {label:?}")));
        }
    }
    Ok(())
}

/// What [`repair_partition`] had to fix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RepairStats {
    /// Input labels absent from the response, re-added as singletons.
    pub missing_restored: usize,
    /// Labels the response listed more than once; first occurrence kept.
    pub duplicates_dropped: usize,
    /// Response labels that were never in the input.
    pub unknown_dropped: usize,
}

impl RepairStats {
    pub fn is_clean(&self) -> bool {
        *self == RepairStats::default()
    }
}

/// Force a backend grouping into a partition of `input`: unknown labels are
/// dropped, duplicated labels keep their first occurrence, missing labels
/// become singleton groups.
pub fn repair_partition(input: &[String], groups: Vec<Vec<String>>) -> (Vec<Vec<String>>, RepairStats) {
    use std::collections::HashSet;
    let known: HashSet<&str> = input.iter().map(String::as_str).collect();
    let mut stats = RepairStats::default();
    let mut placed: HashSet<String> = HashSet::new();
    let mut repaired: Vec<Vec<String>> = Vec::new();
    for group in groups {
        let mut kept = Vec::new();
        for label in group {
            if !known.contains(label.as_str()) {
                stats.unknown_dropped += 1;
            } else if placed.contains(&label) {
                stats.duplicates_dropped += 1;
            } else {
                placed.insert(label.clone());
                kept.push(label);
            }
        }
        if !kept.is_empty() {
            repaired.push(kept);
        }
    }
    for label in input {
        if !placed.contains(label) {
            stats.missing_restored += 1;
            repaired.push(vec![label.clone()]);
        }
    }
    (repaired, stats)
}
