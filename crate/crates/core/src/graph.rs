//! Typed knowledge-graph store: entity table, deduplicated triplet set, and
//! head/tail/relation indices. Every insertion is gated by the metagraph.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label;
use crate::metagraph::{EntityClass, Metagraph, MetagraphError, TripletType};

/// Opaque entity identifier; dense, assigned in registration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl std::fmt::Display for EntityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// A registered entity: its type name and normalized display label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: EntityId,
    pub entity_type: String,
    pub label: String,
}

/// A directed edge between two registered entities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triplet {
    pub head: EntityId,
    pub relation: String,
    pub tail: EntityId,
}

impl Triplet {
    pub fn new(head: EntityId, relation: impl Into<String>, tail: EntityId) -> Self {
        Self { head, relation: relation.into(), tail }
    }
}

/// Outcome of an insertion attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddResult {
    Inserted,
    Duplicate,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("label is empty after normalization")]
    EmptyLabel,
    #[error("entity type {0} is not declared in the metagraph")]
    UndeclaredEntityType(String),
    #[error("entity id {0} is not registered")]
    UnregisteredEntity(EntityId),
    #[error("triplet type {0} is not allowed by the metagraph")]
    NonConformingTriplet(TripletType),
    #[error(transparent)]
    Metagraph(#[from] MetagraphError),
}

struct EntityRecord {
    entity_type: String,
    label: String,
}

/// Table 1-style counts for a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub user_count: usize,
    pub item_count: usize,
    pub entity_count: usize,
    pub general_topic_count: usize,
    pub specific_topic_count: usize,
    pub entity_type_count: usize,
    pub relation_type_count: usize,
    pub user_entity_relation_count: usize,
    pub item_entity_relation_count: usize,
}

/// A triplet that fails the metagraph check, with the type it would need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub triplet: Triplet,
    pub triplet_type: TripletType,
}

pub type ViolationReport = Vec<Violation>;

/// Entity table plus deduplicated triplet store.
///
/// Reads are safe from any number of threads; mutation is single-writer.
pub struct KnowledgeGraph {
    metagraph: Metagraph,
    entities: Vec<EntityRecord>,
    // (type, case-folded label) -> id; registration is idempotent on this key.
    key_index: HashMap<(String, String), EntityId>,
    triplets: Vec<Triplet>,
    seen: HashSet<Triplet>,
    by_head: HashMap<EntityId, Vec<usize>>,
    by_tail: HashMap<EntityId, Vec<usize>>,
    by_relation: HashMap<String, Vec<usize>>,
}

impl KnowledgeGraph {
    pub fn new(metagraph: Metagraph) -> Self {
        Self {
            metagraph,
            entities: Vec::new(),
            key_index: HashMap::new(),
            triplets: Vec::new(),
            seen: HashSet::new(),
            by_head: HashMap::new(),
            by_tail: HashMap::new(),
            by_relation: HashMap::new(),
        }
    }

    pub fn metagraph(&self) -> &Metagraph {
        &self.metagraph
    }

    /// Extend the schema in place; existing triplets stay valid because the
    /// merge only adds allowances.
    pub fn merge_metagraph(&mut self, other: &Metagraph) -> Result<(), MetagraphError> {
        self.metagraph = crate::metagraph::merge_metagraphs(&self.metagraph, other)?;
        Ok(())
    }

    /// Register an entity, returning the existing id when the
    /// (type, case-folded label) pair is already present.
    ///
    /// Topic-class labels are stored case-folded; other classes keep their
    /// original case for display.
    pub fn register_entity(&mut self, label: &str, entity_type: &str) -> Result<EntityId, GraphError> {
        let class = self
            .metagraph
            .class_of(entity_type)
            .ok_or_else(|| GraphError::UndeclaredEntityType(entity_type.to_string()))?;
        let normalized = label::normalize(label).ok_or(GraphError::EmptyLabel)?;
        let key = label::fold_key(&normalized);
        if let Some(&id) = self.key_index.get(&(entity_type.to_string(), key.clone())) {
            return Ok(id);
        }
        let stored = if class == EntityClass::Topic { key.clone() } else { normalized };
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(EntityRecord { entity_type: entity_type.to_string(), label: stored });
        self.key_index.insert((entity_type.to_string(), key), id);
        Ok(id)
    }

    pub fn entity(&self, id: EntityId) -> Option<Entity> {
        self.entities.get(id.0 as usize).map(|rec| Entity {
            id,
            entity_type: rec.entity_type.clone(),
            label: rec.label.clone(),
        })
    }

    pub fn entity_type_of(&self, id: EntityId) -> Option<&str> {
        self.entities.get(id.0 as usize).map(|rec| rec.entity_type.as_str())
    }

    pub fn label_of(&self, id: EntityId) -> Option<&str> {
        self.entities.get(id.0 as usize).map(|rec| rec.label.as_str())
    }

    pub fn class_of_entity(&self, id: EntityId) -> Option<EntityClass> {
        self.entity_type_of(id).and_then(|t| self.metagraph.class_of(t))
    }

    /// Look up an entity by type and label (case-insensitive match).
    pub fn lookup(&self, entity_type: &str, label: &str) -> Option<EntityId> {
        let normalized = label::normalize(label)?;
        let key = label::fold_key(&normalized);
        self.key_index.get(&(entity_type.to_string(), key)).copied()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn entities_of_type<'a>(&'a self, entity_type: &'a str) -> impl Iterator<Item = EntityId> + 'a {
        self.entity_ids()
            .filter(move |&id| self.entities[id.0 as usize].entity_type == entity_type)
    }

    fn triplet_type_of(&self, t: &Triplet) -> Result<TripletType, GraphError> {
        let head_type = self.entity_type_of(t.head).ok_or(GraphError::UnregisteredEntity(t.head))?;
        let tail_type = self.entity_type_of(t.tail).ok_or(GraphError::UnregisteredEntity(t.tail))?;
        Ok(TripletType::new(head_type, t.relation.clone(), tail_type))
    }

    /// Whether `(type(head), relation, type(tail))` is a declared triplet type.
    pub fn conforms(&self, t: &Triplet) -> Result<bool, GraphError> {
        let tt = self.triplet_type_of(t)?;
        Ok(self.metagraph.allows(&tt.head, &tt.relation, &tt.tail))
    }

    /// Insert a triplet after conformance and duplicate checks.
    pub fn add_triplet(&mut self, t: Triplet) -> Result<AddResult, GraphError> {
        let tt = self.triplet_type_of(&t)?;
        if !self.metagraph.allows(&tt.head, &tt.relation, &tt.tail) {
            return Err(GraphError::NonConformingTriplet(tt));
        }
        if self.seen.contains(&t) {
            return Ok(AddResult::Duplicate);
        }
        let idx = self.triplets.len();
        self.by_head.entry(t.head).or_default().push(idx);
        self.by_tail.entry(t.tail).or_default().push(idx);
        self.by_relation.entry(t.relation.clone()).or_default().push(idx);
        self.seen.insert(t.clone());
        self.triplets.push(t);
        Ok(AddResult::Inserted)
    }

    pub fn triplet_count(&self) -> usize {
        self.triplets.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = &Triplet> {
        self.triplets.iter()
    }

    pub fn contains_triplet(&self, t: &Triplet) -> bool {
        self.seen.contains(t)
    }

    pub fn triplets_from(&self, head: EntityId) -> impl Iterator<Item = &Triplet> {
        self.by_head.get(&head).into_iter().flatten().map(|&i| &self.triplets[i])
    }

    pub fn triplets_to(&self, tail: EntityId) -> impl Iterator<Item = &Triplet> {
        self.by_tail.get(&tail).into_iter().flatten().map(|&i| &self.triplets[i])
    }

    pub fn triplets_with_relation(&self, relation: &str) -> impl Iterator<Item = &Triplet> {
        self.by_relation.get(relation).into_iter().flatten().map(|&i| &self.triplets[i])
    }

    /// Number of triplets incident to an entity, in either direction.
    pub fn degree(&self, id: EntityId) -> usize {
        self.by_head.get(&id).map_or(0, Vec::len) + self.by_tail.get(&id).map_or(0, Vec::len)
    }

    /// Audit every stored triplet against the metagraph.
    pub fn validate_graph(&self) -> ViolationReport {
        self.triplets
            .iter()
            .filter_map(|t| {
                let tt = self
                    .triplet_type_of(t)
                    .expect("stored triplets reference registered entities");
                if self.metagraph.allows(&tt.head, &tt.relation, &tt.tail) {
                    None
                } else {
                    Some(Violation { triplet: t.clone(), triplet_type: tt })
                }
            })
            .collect()
    }

    pub fn stats(&self) -> GraphStats {
        let mut user_count = 0;
        let mut item_count = 0;
        let mut general_topic_count = 0;
        let mut specific_topic_count = 0;
        for rec in &self.entities {
            match self.metagraph.class_of(&rec.entity_type) {
                Some(EntityClass::User) => user_count += 1,
                Some(EntityClass::Item) => item_count += 1,
                _ => {}
            }
            match rec.entity_type.as_str() {
                crate::metagraph::SUBTYPE_TYPE => general_topic_count += 1,
                crate::metagraph::WORD_TYPE => specific_topic_count += 1,
                _ => {}
            }
        }
        let mut user_entity_relation_count = 0;
        let mut item_entity_relation_count = 0;
        for t in &self.triplets {
            match self.class_of_entity(t.head) {
                Some(EntityClass::User) => user_entity_relation_count += 1,
                Some(EntityClass::Item) => item_entity_relation_count += 1,
                _ => {}
            }
        }
        GraphStats {
            user_count,
            item_count,
            entity_count: self.entities.len(),
            general_topic_count,
            specific_topic_count,
            entity_type_count: self.metagraph.entity_type_count(),
            relation_type_count: self.metagraph.relation_type_count(),
            user_entity_relation_count,
            item_entity_relation_count,
        }
    }

    /// Test-only escape hatch: insert without the conformance check, so
    /// validation failures can be exercised.
    #[doc(hidden)]
    pub fn add_triplet_unchecked(&mut self, t: Triplet) {
        if self.seen.contains(&t) {
            return;
        }
        let idx = self.triplets.len();
        self.by_head.entry(t.head).or_default().push(idx);
        self.by_tail.entry(t.tail).or_default().push(idx);
        self.by_relation.entry(t.relation.clone()).or_default().push(idx);
        self.seen.insert(t.clone());
        self.triplets.push(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metagraph::{self, standard_metagraph, topic_aware_metagraph};

    fn topic_graph() -> KnowledgeGraph {
        KnowledgeGraph::new(topic_aware_metagraph(&standard_metagraph()).unwrap())
    }

    #[test]
    fn graph_is_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<KnowledgeGraph>();
    }

    #[test]
    fn register_is_idempotent() {
        let mut kg = topic_graph();
        let a = kg.register_entity("L'Oreal", "Brand").unwrap();
        let b = kg.register_entity("L'Oreal", "Brand").unwrap();
        assert_eq!(a, b);
        assert_eq!(kg.entity_count(), 1);
    }

    #[test]
    fn register_fresh_subtype_grows_count() {
        let mut kg = topic_graph();
        let before = kg.entity_count();
        let id = kg.register_entity("Hydrating Serum", "Subtype").unwrap();
        assert_eq!(kg.entity_count(), before + 1);
        // Topic labels are stored case-folded.
        assert_eq!(kg.label_of(id), Some("hydrating serum"));
    }

    #[test]
    fn register_rejects_blank_label() {
        let mut kg = topic_graph();
        assert!(matches!(kg.register_entity("  ", "Brand"), Err(GraphError::EmptyLabel)));
    }

    #[test]
    fn register_rejects_undeclared_type() {
        let mut kg = topic_graph();
        assert!(matches!(
            kg.register_entity("x", "Price"),
            Err(GraphError::UndeclaredEntityType(_))
        ));
    }

    #[test]
    fn case_fold_matching_keeps_display_case() {
        let mut kg = topic_graph();
        let a = kg.register_entity("L'Oreal", "Brand").unwrap();
        let b = kg.register_entity("l'oreal", "Brand").unwrap();
        assert_eq!(a, b);
        assert_eq!(kg.label_of(a), Some("L'Oreal"));
    }

    #[test]
    fn conforms_respects_direction() {
        let mut kg = topic_graph();
        let user = kg.register_entity("u1", "User").unwrap();
        let word = kg.register_entity("hydrating", "Word").unwrap();
        let ok = Triplet::new(user, metagraph::MENTION, word);
        let flipped = Triplet::new(word, metagraph::MENTION, user);
        assert!(kg.conforms(&ok).unwrap());
        assert!(!kg.conforms(&flipped).unwrap());
    }

    #[test]
    fn conforms_tagged_item_word() {
        let mut kg = topic_graph();
        let item = kg.register_entity("i1", "Item").unwrap();
        let word = kg.register_entity("vegan", "Word").unwrap();
        assert!(kg.conforms(&Triplet::new(item, metagraph::TAGGED, word)).unwrap());
    }

    #[test]
    fn conforms_errors_on_unregistered_entity() {
        let kg = topic_graph();
        let t = Triplet::new(EntityId(0), "mention", EntityId(1));
        assert!(matches!(kg.conforms(&t), Err(GraphError::UnregisteredEntity(_))));
    }

    #[test]
    fn add_triplet_dedups() {
        let mut kg = topic_graph();
        let user = kg.register_entity("u1", "User").unwrap();
        let item = kg.register_entity("i1", "Item").unwrap();
        let t = Triplet::new(user, "purchase", item);
        assert_eq!(kg.add_triplet(t.clone()).unwrap(), AddResult::Inserted);
        assert_eq!(kg.add_triplet(t).unwrap(), AddResult::Duplicate);
        assert_eq!(kg.triplet_count(), 1);
    }

    #[test]
    fn add_triplet_rejects_nonconforming() {
        let mut kg = topic_graph();
        let user = kg.register_entity("u1", "User").unwrap();
        let word = kg.register_entity("vegan", "Word").unwrap();
        let err = kg.add_triplet(Triplet::new(user, metagraph::TAGGED, word));
        match err {
            Err(GraphError::NonConformingTriplet(tt)) => {
                assert_eq!(tt, TripletType::new("User", "tagged", "Word"));
            }
            other => panic!("expected NonConformingTriplet, got {other:?}"),
        }
    }

    #[test]
    fn validate_reports_injected_edge() {
        let mut kg = topic_graph();
        let user = kg.register_entity("u1", "User").unwrap();
        let word = kg.register_entity("vegan", "Word").unwrap();
        assert!(kg.validate_graph().is_empty());
        kg.add_triplet_unchecked(Triplet::new(user, metagraph::TAGGED, word));
        let report = kg.validate_graph();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].triplet_type, TripletType::new("User", "tagged", "Word"));
    }

    #[test]
    fn stats_on_empty_graph() {
        let kg = topic_graph();
        let s = kg.stats();
        assert_eq!(s.entity_count, 0);
        assert_eq!(s.user_count, 0);
        assert_eq!(s.user_entity_relation_count, 0);
        // Declared type counts survive an empty graph.
        assert_eq!(s.entity_type_count, 7);
    }

    #[test]
    fn stats_counts_head_classes() {
        let mut kg = topic_graph();
        let user = kg.register_entity("u1", "User").unwrap();
        let item = kg.register_entity("i1", "Item").unwrap();
        let brand = kg.register_entity("b1", "Brand").unwrap();
        let word = kg.register_entity("soft", "Word").unwrap();
        kg.add_triplet(Triplet::new(user, "purchase", item)).unwrap();
        kg.add_triplet(Triplet::new(item, "produced_by", brand)).unwrap();
        kg.add_triplet(Triplet::new(item, metagraph::DESCRIBED_AS, word)).unwrap();
        let s = kg.stats();
        assert_eq!(s.user_entity_relation_count, 1);
        assert_eq!(s.item_entity_relation_count, 2);
        assert_eq!(s.specific_topic_count, 1);
        assert_eq!(s.entity_count, 4);
        assert!(s.entity_count >= s.user_count + s.item_count);
    }
}
