//! Specific-topic extraction: run every context document (one description per
//! item, every review) through the backend, accumulate the candidate word
//! table with frequencies and provenance, and stage provisional topic edges.
//!
//! Documents are independent, so extraction parallelizes freely; the table is
//! a commutative merge with order-independent totals.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, SourceKind, SpecificTopicRequest, TopicBackend};
use crate::checkpoint::Checkpoint;
use crate::graph::{EntityId, GraphError, KnowledgeGraph};
use crate::ingest::{ContextDoc, ContextStore};
use crate::label;
use crate::metagraph::{DESCRIBED_AS, MENTION, TAGGED};

#[derive(Debug, Error)]
pub enum SpecificError {
    #[error("document {doc}: {source}")]
    Backend { doc: String, source: BackendError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("document {doc} references unknown {entity_type} {label:?}")]
    UnknownEntity { doc: String, entity_type: String, label: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a candidate label was seen.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateSource {
    pub origin: SourceKind,
    pub item_id: String,
    pub user_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEntry {
    /// Number of (document, label) extractions that produced this label.
    pub frequency: u64,
    pub sources: BTreeSet<CandidateSource>,
}

/// Candidate specific topics with usage frequency and provenance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateWordTable {
    entries: BTreeMap<String, CandidateEntry>,
}

impl CandidateWordTable {
    pub fn record(&mut self, word_label: &str, source: CandidateSource) {
        let entry = self.entries.entry(word_label.to_string()).or_default();
        entry.frequency += 1;
        entry.sources.insert(source);
    }

    /// Rebuild an entry from persisted label/frequency rows (provenance is
    /// not persisted).
    pub fn set_frequency(&mut self, word_label: &str, frequency: u64) {
        self.entries.entry(word_label.to_string()).or_default().frequency = frequency;
    }

    pub fn frequency_of(&self, word_label: &str) -> u64 {
        self.entries.get(word_label).map_or(0, |e| e.frequency)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CandidateEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn total_frequency(&self) -> u64 {
        self.entries.values().map(|e| e.frequency).sum()
    }
}

/// Relations a staged topic edge may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicRelation {
    Mention,
    DescribedAs,
    Tagged,
}

impl TopicRelation {
    pub fn as_str(self) -> &'static str {
        match self {
            TopicRelation::Mention => MENTION,
            TopicRelation::DescribedAs => DESCRIBED_AS,
            TopicRelation::Tagged => TAGGED,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            MENTION => Some(TopicRelation::Mention),
            DESCRIBED_AS => Some(TopicRelation::DescribedAs),
            TAGGED => Some(TopicRelation::Tagged),
            _ => None,
        }
    }
}

/// A provisional topic edge awaiting the canonical map.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StagedTopicEdge {
    pub head: EntityId,
    pub relation: TopicRelation,
    pub label: String,
}

/// Labels per processed document key.
pub type SpecificProgress = BTreeMap<String, Vec<String>>;

type IndexedLabels = (usize, Result<Option<Vec<String>>, SpecificError>);

#[derive(Debug, Default)]
pub struct SpecificExtraction {
    pub table: CandidateWordTable,
    pub staged: BTreeSet<StagedTopicEdge>,
    pub skipped_empty: usize,
    pub calls_made: usize,
}

/// Extract specific topics for every context document.
///
/// Per review, each label stages both a `mention` edge (the reviewing user)
/// and a `described_as` edge (the reviewed item); per description, a `tagged`
/// edge. Frequencies increment once per (document, label).
pub fn extract_candidate_words<B: TopicBackend>(
    kg: &KnowledgeGraph,
    context: &ContextStore,
    backend: &B,
    checkpoint: &mut Checkpoint<SpecificProgress>,
) -> Result<SpecificExtraction, SpecificError> {
    // Duplicate (user, item) reviews are distinct documents; disambiguate
    // their checkpoint keys positionally.
    let mut key_counts: BTreeMap<String, usize> = BTreeMap::new();
    let docs: Vec<(String, &ContextDoc)> = context
        .docs
        .iter()
        .map(|doc| {
            let base = doc.key();
            let n = key_counts.entry(base.clone()).or_insert(0);
            let key = if *n == 0 { base } else { format!("{base}#{n}") };
            *n += 1;
            (key, doc)
        })
        .collect();

    let shared = Mutex::new(checkpoint);
    let fresh_calls = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<IndexedLabels> = docs
        .par_iter()
        .enumerate()
        .map(|(idx, (key, doc))| {
            if let Some(labels) = {
                let guard = shared.lock().expect("checkpoint poisoned");
                guard.progress.get(key).cloned()
            } {
                return (idx, Ok(Some(labels)));
            }
            if label::normalize(doc.text()).is_none() {
                return (idx, Ok(None));
            }
            let source_kind = match doc {
                ContextDoc::Description { .. } => SourceKind::Description,
                ContextDoc::Review { .. } => SourceKind::Review,
            };
            let request = SpecificTopicRequest { text: doc.text().to_string(), source_kind };
            fresh_calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            match backend.extract_specific_topics(&request) {
                Ok(labels) => {
                    let mut guard = shared.lock().expect("checkpoint poisoned");
                    guard.progress.insert(key.clone(), labels.clone());
                    let _ = guard.save();
                    (idx, Ok(Some(labels)))
                }
                Err(source) => {
                    (idx, Err(SpecificError::Backend { doc: key.clone(), source }))
                }
            }
        })
        .collect();

    let checkpoint = shared.into_inner().expect("checkpoint poisoned");
    checkpoint.save()?;

    let mut out =
        SpecificExtraction { calls_made: fresh_calls.into_inner(), ..Default::default() };
    let mut first_error = None;
    let mut results = results;
    results.sort_by_key(|(idx, _)| *idx);
    for (idx, result) in results {
        let (key, doc) = &docs[idx];
        match result {
            Err(err) => {
                if first_error.is_none() {
                    first_error = Some(err);
                }
            }
            Ok(None) => out.skipped_empty += 1,
            Ok(Some(labels)) => stage_document(kg, doc, key, &labels, &mut out)?,
        }
    }
    match first_error {
        Some(err) => Err(err),
        None => Ok(out),
    }
}

fn stage_document(
    kg: &KnowledgeGraph,
    doc: &ContextDoc,
    key: &str,
    labels: &[String],
    out: &mut SpecificExtraction,
) -> Result<(), SpecificError> {
    match doc {
        ContextDoc::Description { item_id, .. } => {
            let item = lookup(kg, "Item", item_id, key)?;
            for word in labels {
                out.table.record(word, CandidateSource {
                    origin: SourceKind::Description,
                    item_id: item_id.clone(),
                    user_id: None,
                });
                out.staged.insert(StagedTopicEdge {
                    head: item,
                    relation: TopicRelation::Tagged,
                    label: word.clone(),
                });
            }
        }
        ContextDoc::Review { user_id, item_id, .. } => {
            let user = lookup(kg, "User", user_id, key)?;
            let item = lookup(kg, "Item", item_id, key)?;
            for word in labels {
                out.table.record(word, CandidateSource {
                    origin: SourceKind::Review,
                    item_id: item_id.clone(),
                    user_id: Some(user_id.clone()),
                });
                out.staged.insert(StagedTopicEdge {
                    head: user,
                    relation: TopicRelation::Mention,
                    label: word.clone(),
                });
                out.staged.insert(StagedTopicEdge {
                    head: item,
                    relation: TopicRelation::DescribedAs,
                    label: word.clone(),
                });
            }
        }
    }
    Ok(())
}

fn lookup(
    kg: &KnowledgeGraph,
    entity_type: &str,
    label: &str,
    doc: &str,
) -> Result<EntityId, SpecificError> {
    kg.lookup(entity_type, label).ok_or_else(|| SpecificError::UnknownEntity {
        doc: doc.to_string(),
        entity_type: entity_type.to_string(),
        label: label.to_string(),
    })
}

/// Check the (head class, relation) legality of a staged edge against the
/// graph.
pub fn edge_is_legal(kg: &KnowledgeGraph, edge: &StagedTopicEdge) -> bool {
    use crate::metagraph::EntityClass;
    matches!(
        (kg.class_of_entity(edge.head), edge.relation),
        (Some(EntityClass::User), TopicRelation::Mention)
            | (Some(EntityClass::Item), TopicRelation::DescribedAs | TopicRelation::Tagged)
    )
}
