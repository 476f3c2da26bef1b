//! Metagraph: the schema layer that gates every edge insertion.
//!
//! A metagraph declares entity types (each tagged with a class), relation
//! types, and the triplet types `(head type, relation, tail type)` a graph is
//! allowed to contain. The base/topic/merge operations derive the working
//! schema from a standardized one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Class tag carried by every entity type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityClass {
    User,
    Item,
    Side,
    Context,
    Topic,
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityClass::User => "user",
            EntityClass::Item => "item",
            EntityClass::Side => "side",
            EntityClass::Context => "context",
            EntityClass::Topic => "topic",
        };
        f.write_str(s)
    }
}

/// A triplet type `(head type, relation, tail type)` referencing declared names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TripletType {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl TripletType {
    pub fn new(head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) -> Self {
        Self { head: head.into(), relation: relation.into(), tail: tail.into() }
    }
}

impl fmt::Display for TripletType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

#[derive(Debug, Error)]
pub enum MetagraphError {
    #[error("triplet type {0} references undeclared entity type {1}")]
    UndeclaredEntityType(TripletType, String),
    #[error("entity type {name} declared as both {a} and {b}")]
    ConflictingDeclaration { name: String, a: EntityClass, b: EntityClass },
    #[error("{0} is not a context entity type")]
    NotAContextType(String),
    #[error("metagraph config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Set of entity types, relation types, and triplet types.
///
/// Every triplet type's components are declared; triplet types are a set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Metagraph {
    entity_types: BTreeMap<String, EntityClass>,
    relation_types: BTreeSet<String>,
    triplet_types: BTreeSet<TripletType>,
}

impl Metagraph {
    /// Build from declarations, validating that every triplet type references
    /// a declared entity type. Relation types are the union of explicitly
    /// declared ones and those used by triplet types.
    pub fn new(
        entity_types: impl IntoIterator<Item = (String, EntityClass)>,
        triplet_types: impl IntoIterator<Item = TripletType>,
    ) -> Result<Self, MetagraphError> {
        let mut m = Metagraph::default();
        for (name, class) in entity_types {
            m.declare_entity_type(name, class)?;
        }
        for tt in triplet_types {
            m.declare_triplet_type(tt)?;
        }
        Ok(m)
    }

    fn declare_entity_type(&mut self, name: String, class: EntityClass) -> Result<(), MetagraphError> {
        if let Some(&existing) = self.entity_types.get(&name) {
            if existing != class {
                return Err(MetagraphError::ConflictingDeclaration { name, a: existing, b: class });
            }
            return Ok(());
        }
        self.entity_types.insert(name, class);
        Ok(())
    }

    fn declare_triplet_type(&mut self, tt: TripletType) -> Result<(), MetagraphError> {
        for side in [&tt.head, &tt.tail] {
            if !self.entity_types.contains_key(side) {
                return Err(MetagraphError::UndeclaredEntityType(tt.clone(), side.clone()));
            }
        }
        self.relation_types.insert(tt.relation.clone());
        self.triplet_types.insert(tt);
        Ok(())
    }

    pub fn entity_types(&self) -> impl Iterator<Item = (&str, EntityClass)> {
        self.entity_types.iter().map(|(n, &c)| (n.as_str(), c))
    }

    pub fn relation_types(&self) -> impl Iterator<Item = &str> {
        self.relation_types.iter().map(|s| s.as_str())
    }

    pub fn triplet_types(&self) -> impl Iterator<Item = &TripletType> {
        self.triplet_types.iter()
    }

    pub fn entity_type_count(&self) -> usize {
        self.entity_types.len()
    }

    pub fn relation_type_count(&self) -> usize {
        self.relation_types.len()
    }

    pub fn triplet_type_count(&self) -> usize {
        self.triplet_types.len()
    }

    pub fn class_of(&self, entity_type: &str) -> Option<EntityClass> {
        self.entity_types.get(entity_type).copied()
    }

    pub fn has_relation(&self, relation: &str) -> bool {
        self.relation_types.contains(relation)
    }

    pub fn allows(&self, head_type: &str, relation: &str, tail_type: &str) -> bool {
        // Allocation-free set probe.
        self.triplet_types.iter().any(|tt| {
            tt.head == head_type && tt.relation == relation && tt.tail == tail_type
        })
    }

    /// Entity types tagged with the given class.
    pub fn types_of_class(&self, class: EntityClass) -> Vec<&str> {
        self.entity_types
            .iter()
            .filter(|(_, &c)| c == class)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Derive the base metagraph: drop every triplet type touching a context
/// entity type or using a context relation. Context entity types disappear
/// from the declared set entirely.
pub fn build_base_metagraph(
    standard: &Metagraph,
    context_types: &BTreeSet<String>,
) -> Result<Metagraph, MetagraphError> {
    for name in context_types {
        match standard.entity_types.get(name) {
            Some(EntityClass::Context) => {}
            _ => return Err(MetagraphError::NotAContextType(name.clone())),
        }
    }
    // Context relations: relations of triplet types whose tail is a context type.
    let context_relations: BTreeSet<&str> = standard
        .triplet_types
        .iter()
        .filter(|tt| context_types.contains(&tt.tail))
        .map(|tt| tt.relation.as_str())
        .collect();

    let entity_types = standard
        .entity_types
        .iter()
        .filter(|(name, _)| !context_types.contains(*name))
        .map(|(n, &c)| (n.clone(), c));
    let triplet_types = standard
        .triplet_types
        .iter()
        .filter(|tt| {
            !context_types.contains(&tt.head)
                && !context_types.contains(&tt.tail)
                && !context_relations.contains(tt.relation.as_str())
        })
        .cloned();
    Metagraph::new(entity_types, triplet_types)
}

/// Entity type names for the topic layer.
pub const SUBTYPE_TYPE: &str = "Subtype";
pub const WORD_TYPE: &str = "Word";
pub const USER_TYPE: &str = "User";
pub const ITEM_TYPE: &str = "Item";

/// Relation names for the topic layer.
pub const RELATED_TO: &str = "related_to";
pub const MENTION: &str = "mention";
pub const DESCRIBED_AS: &str = "described_as";
pub const TAGGED: &str = "tagged";

/// The topic-only metagraph: heads restricted to User/Item, tails to the two
/// topic entity types.
pub fn build_topic_metagraph() -> Metagraph {
    Metagraph::new(
        [
            (USER_TYPE.to_string(), EntityClass::User),
            (ITEM_TYPE.to_string(), EntityClass::Item),
            (SUBTYPE_TYPE.to_string(), EntityClass::Topic),
            (WORD_TYPE.to_string(), EntityClass::Topic),
        ],
        [
            TripletType::new(ITEM_TYPE, RELATED_TO, SUBTYPE_TYPE),
            TripletType::new(USER_TYPE, MENTION, WORD_TYPE),
            TripletType::new(ITEM_TYPE, DESCRIBED_AS, WORD_TYPE),
            TripletType::new(ITEM_TYPE, TAGGED, WORD_TYPE),
        ],
    )
    .expect("topic metagraph is closed over its own declarations")
}

/// Set union of two metagraphs. Shared names must denote identical
/// declarations.
pub fn merge_metagraphs(a: &Metagraph, b: &Metagraph) -> Result<Metagraph, MetagraphError> {
    let mut merged = a.clone();
    for (name, &class) in &b.entity_types {
        merged.declare_entity_type(name.clone(), class)?;
    }
    for rel in &b.relation_types {
        merged.relation_types.insert(rel.clone());
    }
    for tt in &b.triplet_types {
        merged.declare_triplet_type(tt.clone())?;
    }
    Ok(merged)
}

// ---------------------------------------------------------------------------
// Config file format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntityTypeDecl {
    name: String,
    class: EntityClass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TripletTypeDecl {
    head: String,
    relation: String,
    tail: String,
}

/// JSON document listing entity types (with class tag) and triplet types.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetagraphConfig {
    entity_types: Vec<EntityTypeDecl>,
    triplet_types: Vec<TripletTypeDecl>,
}

impl MetagraphConfig {
    pub fn from_json(json: &str) -> Result<Self, MetagraphError> {
        serde_json::from_str(json).map_err(|e| MetagraphError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, MetagraphError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn build(&self) -> Result<Metagraph, MetagraphError> {
        Metagraph::new(
            self.entity_types.iter().map(|d| (d.name.clone(), d.class)),
            self.triplet_types
                .iter()
                .map(|d| TripletType::new(d.head.clone(), d.relation.clone(), d.tail.clone())),
        )
    }

    pub fn from_metagraph(m: &Metagraph) -> Self {
        Self {
            entity_types: m
                .entity_types
                .iter()
                .map(|(n, &c)| EntityTypeDecl { name: n.clone(), class: c })
                .collect(),
            triplet_types: m
                .triplet_types
                .iter()
                .map(|tt| TripletTypeDecl {
                    head: tt.head.clone(),
                    relation: tt.relation.clone(),
                    tail: tt.tail.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Bundled standardized metagraph. Alternative standards load from a config
/// file with the same schema.
pub const DEFAULT_STANDARD_JSON: &str = include_str!("default_metagraph.json");

/// The bundled standardized metagraph: users, items, brand/type/related-item
/// side information, and description/review context information.
pub fn standard_metagraph() -> Metagraph {
    MetagraphConfig::from_json(DEFAULT_STANDARD_JSON)
        .expect("bundled config parses")
        .build()
        .expect("bundled config is closed")
}

/// Context entity types of a metagraph (class = context).
pub fn context_types(m: &Metagraph) -> BTreeSet<String> {
    m.types_of_class(EntityClass::Context)
        .into_iter()
        .map(str::to_string)
        .collect()
}

/// Convenience: the topic-aware metagraph derived from a standard one,
/// `merge(base(standard), topic())`.
pub fn topic_aware_metagraph(standard: &Metagraph) -> Result<Metagraph, MetagraphError> {
    let base = build_base_metagraph(standard, &context_types(standard))?;
    merge_metagraphs(&base, &build_topic_metagraph())
}
