//! Topic refinement: recursive prefix partitioning of candidate words into
//! subsets of at most T, per-subset synonym grouping through the backend,
//! frequency-based canonical selection, and final materialization of topic
//! edges.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{repair_partition, BackendError, RepairStats, SynonymGroupRequest, TopicBackend};
use crate::checkpoint::Checkpoint;
use crate::graph::{AddResult, GraphError, KnowledgeGraph, Triplet};
use crate::metagraph::{build_topic_metagraph, MetagraphError, WORD_TYPE};
use crate::specific::{CandidateWordTable, StagedTopicEdge};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("subset {subset}: {source}")]
    Backend { subset: usize, source: BackendError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metagraph(#[from] MetagraphError),
    #[error("staged label {0:?} is not in the canonical map")]
    UnmappedLabel(String),
    #[error("label {0:?} is not in the candidate table")]
    UnknownLabel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Prefix partition
// ---------------------------------------------------------------------------

/// Recursively partition labels by prefix until every subset has at most
/// `max_subset` members.
///
/// At recursion depth for prefix length L, words are bucketed by their
/// character at index L (any Unicode scalar). A word exhausted by the current
/// prefix (no character at index L) is emitted as its own singleton subset,
/// which keeps the partition a cover. Distinct labels always diverge at some
/// index, so recursion terminates.
pub fn topic_partition<I, S>(labels: I, max_subset: usize) -> Vec<Vec<String>>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    assert!(max_subset >= 1, "max_subset must be at least 1");
    // Chars are cached so multi-byte labels index by scalar value, not bytes.
    let mut words: Vec<(String, Vec<char>)> = labels
        .into_iter()
        .map(|s| {
            let s = s.into();
            let chars = s.chars().collect();
            (s, chars)
        })
        .collect();
    words.sort();
    words.dedup_by(|a, b| a.0 == b.0);

    let mut partition = Vec::new();
    partition_level(words, 0, max_subset, &mut partition);
    partition
}

fn partition_level(
    words: Vec<(String, Vec<char>)>,
    depth: usize,
    max_subset: usize,
    out: &mut Vec<Vec<String>>,
) {
    if words.is_empty() {
        return;
    }
    let mut buckets: BTreeMap<char, Vec<(String, Vec<char>)>> = BTreeMap::new();
    for (word, chars) in words {
        match chars.get(depth).copied() {
            // Prefix-exhausted: the word *is* the current prefix.
            None => out.push(vec![word]),
            Some(c) => buckets.entry(c).or_default().push((word, chars)),
        }
    }
    for bucket in buckets.into_values() {
        if bucket.len() <= max_subset {
            out.push(bucket.into_iter().map(|(w, _)| w).collect());
        } else {
            partition_level(bucket, depth + 1, max_subset, out);
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical map
// ---------------------------------------------------------------------------

/// Maps every candidate label to its group's canonical label. Canonicals map
/// to themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalMap {
    entries: BTreeMap<String, String>,
}

impl CanonicalMap {
    pub fn canonical_of(&self, label: &str) -> Option<&str> {
        self.entries.get(label).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn distinct_canonicals(&self) -> usize {
        self.entries.values().collect::<std::collections::BTreeSet<_>>().len()
    }

    fn insert_group(&mut self, group: &[String], table: &CandidateWordTable) {
        debug_assert!(!group.is_empty());
        // Max frequency wins; ties break to the lexicographically smallest.
        let canonical = group
            .iter()
            .max_by(|a, b| {
                table
                    .frequency_of(a)
                    .cmp(&table.frequency_of(b))
                    .then_with(|| b.cmp(a))
            })
            .expect("non-empty group")
            .clone();
        for label in group {
            self.entries.insert(label.clone(), canonical.clone());
        }
    }
}

/// Per-subset grouping results keyed by subset index.
pub type RefineProgress = BTreeMap<usize, Vec<Vec<String>>>;

type IndexedGroups = (usize, Result<Vec<Vec<String>>, RefineError>);

#[derive(Debug)]
pub struct RefineOutcome {
    pub map: CanonicalMap,
    pub repairs: RepairStats,
    pub calls_made: usize,
}

/// Send each partition subset to the backend for synonym grouping and choose
/// canonical labels by frequency.
pub fn refine_topics<B: TopicBackend>(
    table: &CandidateWordTable,
    partition: &[Vec<String>],
    backend: &B,
    checkpoint: &mut Checkpoint<RefineProgress>,
) -> Result<RefineOutcome, RefineError> {
    for subset in partition {
        for label in subset {
            if table.frequency_of(label) == 0 {
                return Err(RefineError::UnknownLabel(label.clone()));
            }
        }
    }

    let shared = Mutex::new(checkpoint);
    let fresh_calls = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<IndexedGroups> = partition
        .par_iter()
        .enumerate()
        .map(|(idx, subset)| {
            if let Some(groups) = {
                let guard = shared.lock().expect("checkpoint poisoned");
                guard.progress.get(&idx).cloned()
            } {
                return (idx, Ok(groups));
            }
            let request = SynonymGroupRequest {
                words: subset.iter().map(|l| (l.clone(), table.frequency_of(l))).collect(),
            };
            fresh_calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            match backend.group_synonyms(&request) {
                Ok(groups) => {
                    let mut guard = shared.lock().expect("checkpoint poisoned");
                    guard.progress.insert(idx, groups.clone());
                    let _ = guard.save();
                    (idx, Ok(groups))
                }
                Err(source) => (idx, Err(RefineError::Backend { subset: idx, source })),
            }
        })
        .collect();

    let checkpoint = shared.into_inner().expect("checkpoint poisoned");
    checkpoint.save()?;

    let mut map = CanonicalMap::default();
    let mut repairs = RepairStats::default();
    let mut first_error = None;
    let mut results = results;
    results.sort_by_key(|(idx, _)| *idx);
    for (idx, result) in results {
        match result {
            Err(err) => {
                if first_error.is_none() {
                    first_error = Some(err);
                }
            }
            Ok(groups) => {
                let (groups, stats) = repair_partition(&partition[idx], groups);
                repairs.missing_restored += stats.missing_restored;
                repairs.duplicates_dropped += stats.duplicates_dropped;
                repairs.unknown_dropped += stats.unknown_dropped;
                for group in &groups {
                    map.insert_group(group, table);
                }
            }
        }
    }
    match first_error {
        Some(err) => Err(err),
        None => Ok(RefineOutcome { map, repairs, calls_made: fresh_calls.into_inner() }),
    }
}

// ---------------------------------------------------------------------------
// Materialization
// ---------------------------------------------------------------------------

#[derive(Debug, Default, PartialEq, Eq)]
pub struct ApplyOutcome {
    pub inserted: usize,
    /// Staged edges that collapsed onto an existing triplet.
    pub collapsed: usize,
    pub word_entities: usize,
}

/// Replace each staged edge's label with its canonical form and add the
/// resulting triplets to the graph.
pub fn apply_canonical_map<'a, I>(
    staged: I,
    map: &CanonicalMap,
    kg: &mut KnowledgeGraph,
) -> Result<ApplyOutcome, RefineError>
where
    I: IntoIterator<Item = &'a StagedTopicEdge>,
{
    kg.merge_metagraph(&build_topic_metagraph())?;
    let words_before = kg.entities_of_type(WORD_TYPE).count();
    let mut outcome = ApplyOutcome::default();
    for edge in staged {
        let canonical = map
            .canonical_of(&edge.label)
            .ok_or_else(|| RefineError::UnmappedLabel(edge.label.clone()))?;
        let word = kg.register_entity(canonical, WORD_TYPE)?;
        match kg.add_triplet(Triplet::new(edge.head, edge.relation.as_str(), word))? {
            AddResult::Inserted => outcome.inserted += 1,
            AddResult::Duplicate => outcome.collapsed += 1,
        }
    }
    outcome.word_entities = kg.entities_of_type(WORD_TYPE).count() - words_before;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// Audit file formats
// ---------------------------------------------------------------------------

pub fn save_partition(partition: &[Vec<String>], path: &Path) -> std::io::Result<()> {
    let body = serde_json::to_string_pretty(partition).expect("partition serializes");
    std::fs::write(path, body)
}

/// `canonical_map.tsv`: label, canonical, frequency.
pub fn save_canonical_map(
    map: &CanonicalMap,
    table: &CandidateWordTable,
    path: &Path,
) -> std::io::Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path)?;
    for (label, canonical) in map.iter() {
        writeln!(file, "{label}\t{canonical}\t{}", table.frequency_of(label))?;
    }
    Ok(())
}
