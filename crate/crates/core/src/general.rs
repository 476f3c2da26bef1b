//! General-topic extraction: walk every type-tree leaf, query the backend
//! per item with the evolving category tree, and attach each item to its
//! subtype.
//!
//! Items within a leaf are strictly sequential because every call's
//! current-tree input depends on prior results; leaves are independent and
//! run in parallel.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, GeneralTopicRequest, TopicBackend};
use crate::checkpoint::Checkpoint;
use crate::graph::{GraphError, KnowledgeGraph, Triplet};
use crate::ingest::{ItemRecord, TypeLeaf};
use crate::label;
use crate::metagraph::{build_topic_metagraph, MetagraphError, RELATED_TO, SUBTYPE_TYPE};

#[derive(Debug, Error)]
pub enum GeneralError {
    #[error("leaf {leaf:?}, item {item}: {source}")]
    Backend { leaf: String, item: String, source: BackendError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metagraph(#[from] MetagraphError),
    #[error("item {0} is in the type tree but not in the item table")]
    MissingItem(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered subtype labels accumulated under one leaf. Order is
/// first-extraction order, so prompts replay identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTree {
    pub leaf_path: Vec<String>,
    pub subtypes: Vec<String>,
}

impl CategoryTree {
    fn new(leaf_path: Vec<String>) -> Self {
        Self { leaf_path, subtypes: Vec::new() }
    }

    /// Append unless an entry with the same normalized key exists.
    fn insert(&mut self, display: &str) -> bool {
        let key = label::fold_key(display);
        if self.subtypes.iter().any(|s| label::fold_key(s) == key) {
            return false;
        }
        self.subtypes.push(display.to_string());
        true
    }
}

/// Per-leaf processed items: (item id, subtype label) in extraction order.
pub type GeneralProgress = BTreeMap<String, Vec<(String, String)>>;

fn leaf_key(path: &[String]) -> String {
    path.join("\u{1f}")
}

/// Result of a full extraction pass.
#[derive(Debug)]
pub struct SubtypeExtraction {
    /// One tree per leaf, in leaf order.
    pub trees: Vec<CategoryTree>,
    /// Backend calls actually made (checkpoint hits excluded).
    pub calls_made: usize,
}

/// Extract one subtype per (item, leaf) pair and add the corresponding
/// `related_to` triplets. Progress lands in `checkpoint` after every item, so
/// interrupted runs resume without re-billing the backend.
pub fn extract_subtypes<B: TopicBackend>(
    kg: &mut KnowledgeGraph,
    leaves: &[TypeLeaf],
    items: &BTreeMap<String, ItemRecord>,
    backend: &B,
    checkpoint: &mut Checkpoint<GeneralProgress>,
) -> Result<SubtypeExtraction, GeneralError> {
    kg.merge_metagraph(&build_topic_metagraph())?;

    for leaf in leaves {
        for item_id in &leaf.items {
            if !items.contains_key(item_id) {
                return Err(GeneralError::MissingItem(item_id.clone()));
            }
        }
    }

    struct LeafOutcome {
        tree: CategoryTree,
        assignments: Vec<(String, String)>,
        calls: usize,
        failure: Option<GeneralError>,
    }

    let shared = Mutex::new(checkpoint);
    let outcomes: Vec<LeafOutcome> = leaves
        .par_iter()
        .map(|leaf| {
            let key = leaf_key(&leaf.path);
            let mut tree = CategoryTree::new(leaf.path.clone());
            let done: BTreeMap<String, String> = {
                let guard = shared.lock().expect("checkpoint poisoned");
                guard.progress.get(&key).cloned().unwrap_or_default().into_iter().collect()
            };
            // Replay checkpointed items first so the tree evolves in the
            // original order.
            let mut assignments: Vec<(String, String)> = Vec::new();
            let replayed: HashSet<&String> = done.keys().collect();
            for item_id in leaf.items.iter() {
                if let Some(label) = done.get(item_id) {
                    tree.insert(label);
                    assignments.push((item_id.clone(), label.clone()));
                }
            }
            let mut calls = 0;
            for item_id in leaf.items.iter() {
                if replayed.contains(item_id) {
                    continue;
                }
                let record = &items[item_id];
                let request = GeneralTopicRequest {
                    item_title: record.title.clone(),
                    type_path: leaf.path.clone(),
                    description: record.description.clone(),
                    current_tree: tree.subtypes.clone(),
                };
                calls += 1;
                let subtype = match backend.extract_general_topic(&request) {
                    Ok(s) => s,
                    Err(source) => {
                        return LeafOutcome {
                            tree,
                            assignments,
                            calls,
                            failure: Some(GeneralError::Backend {
                                leaf: leaf.path.join(" / "),
                                item: item_id.clone(),
                                source,
                            }),
                        };
                    }
                };
                tree.insert(&subtype);
                assignments.push((item_id.clone(), subtype.clone()));
                let mut guard = shared.lock().expect("checkpoint poisoned");
                guard.progress.entry(key.clone()).or_default().push((item_id.clone(), subtype));
                let _ = guard.save();
            }
            LeafOutcome { tree, assignments, calls, failure: None }
        })
        .collect();

    let checkpoint = shared.into_inner().expect("checkpoint poisoned");
    checkpoint.save()?;

    let mut failure = None;
    let mut trees = Vec::with_capacity(outcomes.len());
    let mut calls_made = 0;
    for outcome in outcomes {
        calls_made += outcome.calls;
        // Apply completed work even when a sibling leaf failed; the
        // checkpoint makes the remainder resumable.
        for (item_id, subtype) in &outcome.assignments {
            let item_ent = kg
                .lookup("Item", item_id)
                .ok_or_else(|| GeneralError::MissingItem(item_id.clone()))?;
            let subtype_ent = kg.register_entity(subtype, SUBTYPE_TYPE)?;
            kg.add_triplet(Triplet::new(item_ent, RELATED_TO, subtype_ent))?;
        }
        trees.push(outcome.tree);
        if failure.is_none() {
            failure = outcome.failure;
        }
    }
    match failure {
        Some(err) => Err(err),
        None => Ok(SubtypeExtraction { trees, calls_made }),
    }
}

/// Write the per-leaf category trees for audit.
pub fn save_category_trees(trees: &[CategoryTree], path: &Path) -> std::io::Result<()> {
    let body = serde_json::to_string_pretty(trees).expect("trees serialize");
    std::fs::write(path, body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::ingest::{build_type_tree, ingest_metagraph, GraphVariant};
    use crate::metagraph::standard_metagraph;
    use std::collections::BTreeMap;

    fn item(id: &str, title: &str) -> ItemRecord {
        ItemRecord {
            item_id: id.into(),
            title: title.into(),
            brand: None,
            category_paths: vec![vec!["Beauty".into(), "Skin Care".into(), "Serum".into()]],
            price: None,
            description: None,
            related: BTreeMap::new(),
        }
    }

    fn setup(items: &[ItemRecord]) -> (KnowledgeGraph, Vec<TypeLeaf>, BTreeMap<String, ItemRecord>) {
        let std = standard_metagraph();
        let mg = ingest_metagraph(&std, GraphVariant::Base).unwrap();
        let (kg, _) =
            crate::ingest::build_base_graph(items, &[], mg, &Default::default()).unwrap();
        let leaves = build_type_tree(items).leaves();
        let table = items.iter().map(|i| (i.item_id.clone(), i.clone())).collect();
        (kg, leaves, table)
    }

    #[test]
    fn serum_leaf_reproduces_worked_example() {
        let items =
            vec![item("A1", "Ultra Hydrating Face Serum"), item("A2", "Collagen Plumping Serum")];
        let (mut kg, leaves, table) = setup(&items);
        let mut ck = Checkpoint::ephemeral();
        let out = extract_subtypes(&mut kg, &leaves, &table, &MockBackend::new(), &mut ck).unwrap();
        assert_eq!(out.trees.len(), 1);
        assert_eq!(out.trees[0].subtypes, ["Hydrating Serum", "Plumping Serum"]);
        assert_eq!(kg.triplets_with_relation(RELATED_TO).count(), 2);
        assert!(kg.validate_graph().is_empty());
    }

    #[test]
    fn duplicate_subtype_adds_edge_but_not_tree_entry() {
        let items = vec![
            item("A1", "Ultra Hydrating Face Serum"),
            item("A2", "Collagen Plumping Serum"),
            item("A3", "Mega Hydrating Night Serum"),
        ];
        let (mut kg, leaves, table) = setup(&items);
        let mut ck = Checkpoint::ephemeral();
        let out = extract_subtypes(&mut kg, &leaves, &table, &MockBackend::new(), &mut ck).unwrap();
        assert_eq!(out.trees[0].subtypes, ["Hydrating Serum", "Plumping Serum"]);
        assert_eq!(kg.triplets_with_relation(RELATED_TO).count(), 3);
        // Two items share one Subtype entity.
        assert_eq!(kg.entities_of_type(SUBTYPE_TYPE).count(), 2);
    }

    #[test]
    fn empty_leaf_makes_no_calls() {
        let (mut kg, _, table) = setup(&[]);
        let mut ck = Checkpoint::ephemeral();
        let out = extract_subtypes(&mut kg, &[], &table, &MockBackend::new(), &mut ck).unwrap();
        assert_eq!(out.calls_made, 0);
        assert!(out.trees.is_empty());
    }

    #[test]
    fn rerun_is_identical_including_order() {
        let items = vec![
            item("A1", "Ultra Hydrating Face Serum"),
            item("A2", "Collagen Plumping Serum"),
            item("A3", "Gentle Foaming Cleanser"),
        ];
        let (mut kg1, leaves, table) = setup(&items);
        let (mut kg2, ..) = setup(&items);
        let mut c1 = Checkpoint::ephemeral();
        let mut c2 = Checkpoint::ephemeral();
        let a = extract_subtypes(&mut kg1, &leaves, &table, &MockBackend::new(), &mut c1).unwrap();
        let b = extract_subtypes(&mut kg2, &leaves, &table, &MockBackend::new(), &mut c2).unwrap();
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn checkpoint_resume_skips_processed_items() {
        struct FailOnce {
            inner: MockBackend,
            fail_item: String,
            tripped: std::sync::atomic::AtomicBool,
        }
        impl TopicBackend for FailOnce {
            fn extract_general_topic(&self, req: &GeneralTopicRequest) -> Result<String, BackendError> {
                if req.item_title.contains(&self.fail_item)
                    && !self.tripped.swap(true, std::sync::atomic::Ordering::SeqCst)
                {
                    return Err(BackendError::Unavailable { attempts: 1, message: "boom".into() });
                }
                self.inner.extract_general_topic(req)
            }
            fn extract_specific_topics(
                &self,
                req: &crate::backend::SpecificTopicRequest,
            ) -> Result<Vec<String>, BackendError> {
                self.inner.extract_specific_topics(req)
            }
            fn group_synonyms(
                &self,
                req: &crate::backend::SynonymGroupRequest,
            ) -> Result<Vec<Vec<String>>, BackendError> {
                self.inner.group_synonyms(req)
            }
            fn model_id(&self) -> &str {
                "fail-once"
            }
        }

        let items =
            vec![item("A1", "Ultra Hydrating Face Serum"), item("A2", "Collagen Plumping Serum")];
        let (mut kg, leaves, table) = setup(&items);
        let dir = tempfile::tempdir().unwrap();
        let ck_path = dir.path().join("general.ckpt.json");
        let backend = FailOnce {
            inner: MockBackend::new(),
            fail_item: "Plumping".into(),
            tripped: Default::default(),
        };

        let mut ck = Checkpoint::load_or_new(&ck_path, "fp".into());
        let err = extract_subtypes(&mut kg, &leaves, &table, &backend, &mut ck);
        assert!(matches!(err, Err(GeneralError::Backend { .. })));
        // First item completed and survives in the checkpoint file.
        let mut ck2: Checkpoint<GeneralProgress> = Checkpoint::load_or_new(&ck_path, "fp".into());
        let done: usize = ck2.progress.values().map(Vec::len).sum();
        assert_eq!(done, 1);

        // Resume: only the failed item is re-requested.
        let (mut kg2, ..) = setup(&items);
        let out = extract_subtypes(&mut kg2, &leaves, &table, &backend, &mut ck2).unwrap();
        assert_eq!(out.calls_made, 1);
        assert_eq!(out.trees[0].subtypes, ["Hydrating Serum", "Plumping Serum"]);
        assert_eq!(kg2.triplets_with_relation(RELATED_TO).count(), 2);
    }

    #[test]
    fn multi_leaf_item_gets_one_call_per_leaf() {
        let mut it = item("A1", "Ultra Hydrating Face Serum");
        it.category_paths.push(vec!["Gift".into(), "Sets".into()]);
        let items = vec![it];
        let (mut kg, leaves, table) = setup(&items);
        assert_eq!(leaves.len(), 2);
        let mut ck = Checkpoint::ephemeral();
        let out = extract_subtypes(&mut kg, &leaves, &table, &MockBackend::new(), &mut ck).unwrap();
        assert_eq!(out.calls_made, 2);
        let item_ent = kg.lookup("Item", "A1").unwrap();
        let related: Vec<_> =
            kg.triplets_from(item_ent).filter(|t| t.relation == RELATED_TO).collect();
        // Both leaves yield the same mock subtype here, so the two edges
        // collapse into one by set semantics.
        assert_eq!(related.len(), 1);
        assert_eq!(out.trees.len(), 2);
    }
}
