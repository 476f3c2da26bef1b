//! Deterministic mock backend.
//!
//! A pure function of its request, so pipelines run end-to-end with no
//! network and tests have a cheap, order-independent oracle.

use std::collections::HashMap;

use super::{
    validate_general, validate_specific, validate_synonyms, BackendError, GeneralTopicRequest,
    SpecificTopicRequest, SynonymGroupRequest, TopicBackend,
};
use crate::ingest::Stopwords;
use crate::label;

#[derive(Debug, Default)]
pub struct MockBackend {
    stopwords: Stopwords,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

const SPECIFIC_TOPIC_LIMIT: usize = 5;

impl TopicBackend for MockBackend {
    /// Subtype = the title's final content word qualified by its last
    /// "-ing" modifier (falling back to the preceding content word), in
    /// title case. Reproduces e.g. "Ultra Hydrating Face Serum" ->
    /// "Hydrating Serum".
    fn extract_general_topic(&self, req: &GeneralTopicRequest) -> Result<String, BackendError> {
        validate_general(req)?;
        let words: Vec<String> = req
            .item_title
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .map(str::to_lowercase)
            .filter(|w| !w.is_empty() && !self.stopwords.contains(w))
            .collect();
        let label = match words.split_last() {
            None => req.type_path.last().expect("validated non-empty").clone(),
            Some((last, rest)) => {
                let modifier = rest
                    .iter()
                    .rev()
                    .find(|w| w.ends_with("ing"))
                    .or_else(|| rest.last());
                match modifier {
                    Some(m) => format!("{} {}", title_case(m), title_case(last)),
                    None => title_case(last),
                }
            }
        };
        label::normalize(&label).ok_or_else(|| {
            BackendError::MalformedResponse("mock produced an empty subtype".into())
        })
    }

    /// Top-5 non-stopword tokens by in-text frequency, ties broken by first
    /// occurrence.
    fn extract_specific_topics(&self, req: &SpecificTopicRequest) -> Result<Vec<String>, BackendError> {
        validate_specific(req)?;
        let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
        let mut order = 0usize;
        for token in req.text.split(|c: char| !c.is_alphanumeric()) {
            let token = token.to_lowercase();
            if token.chars().count() < 3 || self.stopwords.contains(&token) {
                continue;
            }
            let entry = counts.entry(token).or_insert((0, order));
            entry.0 += 1;
            order += 1;
        }
        let mut ranked: Vec<(String, (usize, usize))> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
        Ok(ranked
            .into_iter()
            .take(SPECIFIC_TOPIC_LIMIT)
            .filter_map(|(w, _)| label::normalize_folded(&w))
            .collect())
    }

    /// Groups labels equal after case-fold, US-spelling normalization, and
    /// stripping a final "s" then "ing".
    fn group_synonyms(&self, req: &SynonymGroupRequest) -> Result<Vec<Vec<String>>, BackendError> {
        validate_synonyms(req)?;
        let mut order: Vec<String> = Vec::new();
        let mut groups: HashMap<String, Vec<String>> = HashMap::new();
        for (word, _) in &req.words {
            let key = synonym_key(word);
            let bucket = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                Vec::new()
            });
            bucket.push(word.clone());
        }
        Ok(order.into_iter().map(|key| groups.remove(&key).expect("keyed")).collect())
    }

    fn model_id(&self) -> &str {
        "mock"
    }
}

fn title_case(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// UK suffixes mapped to US spelling before stemming.
const SPELLING_SUFFIXES: [(&str, &str); 5] = [
    ("isation", "ization"),
    ("ising", "izing"),
    ("iser", "izer"),
    ("ised", "ized"),
    ("ise", "ize"),
];

const SPELLING_WORDS: [(&str, &str); 6] = [
    ("colour", "color"),
    ("flavour", "flavor"),
    ("odour", "odor"),
    ("grey", "gray"),
    ("centre", "center"),
    ("fibre", "fiber"),
];

fn synonym_key(label: &str) -> String {
    let mut key = label.to_lowercase();
    for (uk, us) in SPELLING_WORDS {
        if key == uk {
            key = us.to_string();
        }
    }
    for (uk, us) in SPELLING_SUFFIXES {
        if let Some(stem) = key.strip_suffix(uk) {
            key = format!("{stem}{us}");
            break;
        }
    }
    if let Some(stem) = key.strip_suffix('s') {
        if stem.chars().count() >= 3 {
            key = stem.to_string();
        }
    }
    if let Some(stem) = key.strip_suffix("ing") {
        if stem.chars().count() >= 3 {
            key = stem.to_string();
        }
    }
    key
}
