//! Ingestion: parse item metadata and review JSONL files and assemble the
//! base extended knowledge graph plus the type tree.
//!
//! Context documents (descriptions, review bodies) are kept in a side table
//! rather than as graph entities; topic extraction consumes them later.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, KnowledgeGraph, Triplet};
use crate::label;
use crate::metagraph::{
    self, build_base_metagraph, context_types, merge_metagraphs, EntityClass, Metagraph,
    MetagraphError, TripletType,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metagraph(#[from] MetagraphError),
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// One catalog item, as parsed from `metadata.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub item_id: String,
    pub title: String,
    pub brand: Option<String>,
    /// Root-to-leaf type label paths; empty paths are dropped at parse time.
    pub category_paths: Vec<Vec<String>>,
    pub price: Option<f64>,
    pub description: Option<String>,
    /// also_bought / also_viewed / bought_together -> external keys.
    pub related: BTreeMap<String, Vec<String>>,
}

/// One review, as parsed from `reviews.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub user_id: String,
    pub item_id: String,
    pub text: String,
    pub rating: Option<f64>,
    pub timestamp: Option<i64>,
}

#[derive(Debug, Deserialize)]
struct RawItem {
    asin: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    brand: Option<String>,
    #[serde(default)]
    categories: Vec<Vec<String>>,
    #[serde(default)]
    price: Option<f64>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    related: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct RawReview {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    #[serde(rename = "reviewText", default)]
    review_text: String,
    #[serde(default)]
    overall: Option<f64>,
    #[serde(rename = "unixReviewTime", default)]
    unix_review_time: Option<i64>,
}

const RELATED_KINDS: [&str; 3] = ["also_bought", "also_viewed", "bought_together"];

/// Parse result: records in file order plus a count of skipped lines.
#[derive(Debug)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub malformed_count: usize,
}

/// Parse line-delimited item metadata. Malformed lines are skipped and
/// counted.
pub fn parse_item_metadata<R: BufRead>(reader: R) -> Result<Parsed<ItemRecord>, IngestError> {
    let mut records = Vec::new();
    let mut malformed_count = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawItem>(&line) {
            Ok(raw) => {
                let related = raw
                    .related
                    .into_iter()
                    .filter(|(k, _)| RELATED_KINDS.contains(&k.as_str()))
                    .collect();
                records.push(ItemRecord {
                    item_id: raw.asin,
                    title: raw.title,
                    brand: raw.brand.filter(|b| !b.trim().is_empty()),
                    category_paths: raw
                        .categories
                        .into_iter()
                        .map(|path| {
                            path.into_iter()
                                .filter_map(|s| label::normalize(&s))
                                .collect::<Vec<_>>()
                        })
                        .filter(|p: &Vec<String>| !p.is_empty())
                        .collect(),
                    price: raw.price,
                    description: raw.description.filter(|d| !d.trim().is_empty()),
                    related,
                });
            }
            Err(_) => malformed_count += 1,
        }
    }
    Ok(Parsed { records, malformed_count })
}

/// Parse line-delimited reviews, mirroring [`parse_item_metadata`].
pub fn parse_reviews<R: BufRead>(reader: R) -> Result<Parsed<ReviewRecord>, IngestError> {
    let mut records = Vec::new();
    let mut malformed_count = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawReview>(&line) {
            Ok(raw) => {
                if raw.reviewer_id.is_empty() || raw.asin.is_empty() {
                    malformed_count += 1;
                    continue;
                }
                records.push(ReviewRecord {
                    user_id: raw.reviewer_id,
                    item_id: raw.asin,
                    text: raw.review_text,
                    rating: raw.overall,
                    timestamp: raw.unix_review_time,
                });
            }
            Err(_) => malformed_count += 1,
        }
    }
    Ok(Parsed { records, malformed_count })
}

// ---------------------------------------------------------------------------
// Type tree
// ---------------------------------------------------------------------------

/// Leaf used by general-topic extraction: the node where an item's category
/// path ends, with its member items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeLeaf {
    pub path: Vec<String>,
    pub items: BTreeSet<String>,
}

#[derive(Debug, Default)]
struct TypeNode {
    children: BTreeMap<String, TypeNode>,
    items: BTreeSet<String>,
}

/// Rooted forest over category path prefixes.
#[derive(Debug, Default)]
pub struct TypeTree {
    roots: BTreeMap<String, TypeNode>,
}

/// Items without any category path are attached here so extraction still
/// visits them.
pub const UNCATEGORIZED: &str = "(uncategorized)";

/// One node per distinct path prefix; membership attaches where a path ends.
pub fn build_type_tree(items: &[ItemRecord]) -> TypeTree {
    let mut tree = TypeTree::default();
    for item in items {
        if item.category_paths.is_empty() {
            tree.insert(&[UNCATEGORIZED.to_string()], &item.item_id);
            continue;
        }
        for path in &item.category_paths {
            tree.insert(path, &item.item_id);
        }
    }
    tree
}

impl TypeTree {
    fn insert(&mut self, path: &[String], item_id: &str) {
        debug_assert!(!path.is_empty());
        let mut node = self.roots.entry(path[0].clone()).or_default();
        for segment in &path[1..] {
            node = node.children.entry(segment.clone()).or_default();
        }
        node.items.insert(item_id.to_string());
    }

    /// Nodes with member items, in depth-first path order.
    pub fn leaves(&self) -> Vec<TypeLeaf> {
        let mut out = Vec::new();
        for (name, node) in &self.roots {
            collect_leaves(node, &mut vec![name.clone()], &mut out);
        }
        out
    }
}

fn collect_leaves(node: &TypeNode, path: &mut Vec<String>, out: &mut Vec<TypeLeaf>) {
    if !node.items.is_empty() {
        out.push(TypeLeaf { path: path.clone(), items: node.items.clone() });
    }
    for (name, child) in &node.children {
        path.push(name.clone());
        collect_leaves(child, path, out);
        path.pop();
    }
}

// ---------------------------------------------------------------------------
// Context store
// ---------------------------------------------------------------------------

/// One context document awaiting topic extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContextDoc {
    Description { item_id: String, text: String },
    Review { user_id: String, item_id: String, text: String },
}

impl ContextDoc {
    /// Stable key used for checkpointing.
    pub fn key(&self) -> String {
        match self {
            ContextDoc::Description { item_id, .. } => format!("desc:{item_id}"),
            ContextDoc::Review { user_id, item_id, .. } => format!("rev:{user_id}:{item_id}"),
        }
    }

    pub fn text(&self) -> &str {
        match self {
            ContextDoc::Description { text, .. } | ContextDoc::Review { text, .. } => text,
        }
    }
}

/// Side table of context documents, keyed off the graph by external ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextStore {
    pub docs: Vec<ContextDoc>,
}

impl ContextStore {
    pub fn description_for(&self, item_id: &str) -> Option<&str> {
        self.docs.iter().find_map(|d| match d {
            ContextDoc::Description { item_id: i, text } if i == item_id => Some(text.as_str()),
            _ => None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let mut out = String::new();
        for doc in &self.docs {
            out.push_str(&serde_json::to_string(doc).expect("doc serializes"));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)?;
        let mut docs = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let doc: ContextDoc = serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            docs.push(doc);
        }
        Ok(Self { docs })
    }
}

// ---------------------------------------------------------------------------
// Tokenization (variant = large)
// ---------------------------------------------------------------------------

const BUNDLED_STOPWORDS: &str = include_str!("stopwords.txt");

/// The bundled English stopword list, optionally extended.
#[derive(Debug, Clone)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Default for Stopwords {
    fn default() -> Self {
        let words = BUNDLED_STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(str::to_string)
            .collect();
        Self { words }
    }
}

impl Stopwords {
    pub fn with_extra<I: IntoIterator<Item = String>>(extra: I) -> Self {
        let mut sw = Self::default();
        sw.words.extend(extra.into_iter().map(|w| w.to_lowercase()));
        sw
    }

    pub fn load_extra(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::with_extra(text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty())))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

/// Split on non-alphanumeric characters, case-fold, drop tokens shorter than
/// three characters and stopwords. Duplicates keep first position only.
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for token in text.split(|c: char| !c.is_alphanumeric()) {
        let token = token.to_lowercase();
        if token.chars().count() < 3 || stopwords.contains(&token) {
            continue;
        }
        if seen.insert(token.clone()) {
            out.push(token);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Graph assembly
// ---------------------------------------------------------------------------

/// Which graph family to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphVariant {
    /// Side information only: purchase, produced_by, belongs_to, also_*.
    Base,
    /// Base plus review words linked as entities.
    Large,
}

impl std::str::FromStr for GraphVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(GraphVariant::Base),
            "large" => Ok(GraphVariant::Large),
            other => Err(format!("unknown variant {other:?} (expected base|large)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub variant: GraphVariant,
    pub max_reviews_per_item: Option<usize>,
    pub stopwords: Stopwords,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { variant: GraphVariant::Base, max_reviews_per_item: None, stopwords: Stopwords::default() }
    }
}

/// Word-link triplet types used by the large variant.
pub fn large_variant_extension() -> Metagraph {
    Metagraph::new(
        [
            (metagraph::USER_TYPE.to_string(), EntityClass::User),
            (metagraph::ITEM_TYPE.to_string(), EntityClass::Item),
            (metagraph::WORD_TYPE.to_string(), EntityClass::Topic),
        ],
        [
            TripletType::new(metagraph::USER_TYPE, metagraph::MENTION, metagraph::WORD_TYPE),
            TripletType::new(metagraph::ITEM_TYPE, metagraph::DESCRIBED_AS, metagraph::WORD_TYPE),
        ],
    )
    .expect("extension is closed")
}

/// The metagraph a freshly ingested graph carries, before topic stages extend
/// it: the context-free base of `standard`, plus word links for the large
/// variant.
pub fn ingest_metagraph(standard: &Metagraph, variant: GraphVariant) -> Result<Metagraph, MetagraphError> {
    let base = build_base_metagraph(standard, &context_types(standard))?;
    match variant {
        GraphVariant::Base => Ok(base),
        GraphVariant::Large => merge_metagraphs(&base, &large_variant_extension()),
    }
}

/// Assemble the base extended graph. Context documents go to the returned
/// side table, not into the graph.
pub fn build_base_graph(
    items: &[ItemRecord],
    reviews: &[ReviewRecord],
    metagraph: Metagraph,
    options: &IngestOptions,
) -> Result<(KnowledgeGraph, ContextStore), IngestError> {
    let mut kg = KnowledgeGraph::new(metagraph);
    let catalog: HashSet<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
    let mut context = ContextStore::default();

    for item in items {
        let item_ent = kg.register_entity(&item.item_id, metagraph::ITEM_TYPE)?;
        if let Some(brand) = &item.brand {
            let brand_ent = kg.register_entity(brand, "Brand")?;
            kg.add_triplet(Triplet::new(item_ent, "produced_by", brand_ent))?;
        }
        for path in &item.category_paths {
            for node in path {
                let type_ent = kg.register_entity(node, "Type")?;
                kg.add_triplet(Triplet::new(item_ent, "belongs_to", type_ent))?;
            }
        }
        for (kind, targets) in &item.related {
            for target in targets {
                // In-catalog related products alias the Item entity itself;
                // out-of-catalog ones become standalone RelatedItem entities.
                let tail = if catalog.contains(target.as_str()) {
                    kg.register_entity(target, metagraph::ITEM_TYPE)?
                } else {
                    kg.register_entity(target, "RelatedItem")?
                };
                kg.add_triplet(Triplet::new(item_ent, kind.as_str(), tail))?;
            }
        }
        if let Some(description) = &item.description {
            context.docs.push(ContextDoc::Description {
                item_id: item.item_id.clone(),
                text: description.clone(),
            });
        }
    }

    let mut per_item_seen: BTreeMap<&str, usize> = BTreeMap::new();
    for review in reviews {
        if let Some(cap) = options.max_reviews_per_item {
            let seen = per_item_seen.entry(review.item_id.as_str()).or_insert(0);
            if *seen >= cap {
                continue;
            }
            *seen += 1;
        }
        let user_ent = kg.register_entity(&review.user_id, metagraph::USER_TYPE)?;
        let item_ent = kg.register_entity(&review.item_id, metagraph::ITEM_TYPE)?;
        kg.add_triplet(Triplet::new(user_ent, "purchase", item_ent))?;

        if options.variant == GraphVariant::Large {
            for word in tokenize(&review.text, &options.stopwords) {
                let word_ent = kg.register_entity(&word, metagraph::WORD_TYPE)?;
                kg.add_triplet(Triplet::new(user_ent, metagraph::MENTION, word_ent))?;
                kg.add_triplet(Triplet::new(item_ent, metagraph::DESCRIBED_AS, word_ent))?;
            }
        }
        if !review.text.trim().is_empty() {
            context.docs.push(ContextDoc::Review {
                user_id: review.user_id.clone(),
                item_id: review.item_id.clone(),
                text: review.text.clone(),
            });
        }
    }

    Ok((kg, context))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metagraph::standard_metagraph;
    use std::io::Cursor;

    const ITEM_LINE: &str = r#"{"asin":"B1","title":"Serum","categories":[["Beauty","Skin Care","Face"]],"brand":"X","related":{"also_bought":["B2"]}}"#;

    #[test]
    fn parses_item_line() {
        let parsed = parse_item_metadata(Cursor::new(ITEM_LINE)).unwrap();
        assert_eq!(parsed.malformed_count, 0);
        assert_eq!(parsed.records.len(), 1);
        let item = &parsed.records[0];
        assert_eq!(item.item_id, "B1");
        assert_eq!(item.category_paths, vec![vec!["Beauty", "Skin Care", "Face"]
            .into_iter()
            .map(str::to_string)
            .collect::<Vec<_>>()]);
        assert_eq!(item.related["also_bought"], vec!["B2".to_string()]);
    }

    #[test]
    fn empty_stream_is_empty() {
        let parsed = parse_item_metadata(Cursor::new("")).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.malformed_count, 0);
    }

    #[test]
    fn missing_asin_counts_as_malformed() {
        let parsed =
            parse_item_metadata(Cursor::new(r#"{"title":"No key"}"#)).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.malformed_count, 1);
    }

    #[test]
    fn parses_review_line() {
        let line = r#"{"reviewerID":"U1","asin":"B1","reviewText":"Very hydrating","overall":5}"#;
        let parsed = parse_reviews(Cursor::new(line)).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let r = &parsed.records[0];
        assert_eq!((r.user_id.as_str(), r.item_id.as_str()), ("U1", "B1"));
        assert_eq!(r.text, "Very hydrating");
        assert_eq!(r.rating, Some(5.0));
    }

    #[test]
    fn empty_review_text_is_kept() {
        let line = r#"{"reviewerID":"U1","asin":"B1"}"#;
        let parsed = parse_reviews(Cursor::new(line)).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].text, "");
    }

    #[test]
    fn duplicate_reviews_are_kept() {
        let line = r#"{"reviewerID":"U1","asin":"B1","reviewText":"a"}
{"reviewerID":"U1","asin":"B1","reviewText":"b"}"#;
        let parsed = parse_reviews(Cursor::new(line)).unwrap();
        assert_eq!(parsed.records.len(), 2);
    }

    fn item(id: &str, paths: &[&[&str]]) -> ItemRecord {
        ItemRecord {
            item_id: id.to_string(),
            title: format!("title {id}"),
            brand: None,
            category_paths: paths
                .iter()
                .map(|p| p.iter().map(|s| s.to_string()).collect())
                .collect(),
            price: None,
            description: None,
            related: BTreeMap::new(),
        }
    }

    #[test]
    fn type_tree_splits_roots_and_leaves() {
        let items = vec![
            item("A", &[&["Beauty", "Skin Care"]]),
            item("B", &[&["Beauty", "Hair Care"]]),
        ];
        let leaves = build_type_tree(&items).leaves();
        assert_eq!(leaves.len(), 2);
        assert_eq!(leaves[0].path, ["Beauty", "Hair Care"]);
        assert_eq!(leaves[1].path, ["Beauty", "Skin Care"]);
    }

    #[test]
    fn shared_leaf_collects_both_items() {
        let items = vec![
            item("A", &[&["Beauty", "Skin Care", "Face"]]),
            item("B", &[&["Beauty", "Skin Care", "Face"]]),
        ];
        let leaves = build_type_tree(&items).leaves();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].items.len(), 2);
    }

    #[test]
    fn multi_path_item_joins_every_leaf() {
        let items = vec![item("A", &[&["Beauty", "Face"], &["Gift", "Sets"]])];
        let leaves = build_type_tree(&items).leaves();
        assert_eq!(leaves.len(), 2);
        assert!(leaves.iter().all(|l| l.items.contains("A")));
    }

    #[test]
    fn pathless_item_goes_to_synthetic_leaf() {
        let items = vec![item("A", &[])];
        let leaves = build_type_tree(&items).leaves();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].path, [UNCATEGORIZED]);
    }

    #[test]
    fn base_variant_counts() {
        let mut it = item("B1", &[&["Beauty", "Skin Care", "Face"]]);
        it.brand = Some("X".into());
        it.related.insert("also_bought".into(), vec!["B9".into()]);
        let reviews = vec![ReviewRecord {
            user_id: "U1".into(),
            item_id: "B1".into(),
            text: "Very hydrating".into(),
            rating: Some(5.0),
            timestamp: None,
        }];
        let std = standard_metagraph();
        let mg = ingest_metagraph(&std, GraphVariant::Base).unwrap();
        let (kg, ctx) = build_base_graph(&[it], &reviews, mg, &IngestOptions::default()).unwrap();
        // 1 purchase + 1 produced_by + 3 belongs_to + 1 also_bought
        assert_eq!(kg.triplet_count(), 6);
        assert_eq!(kg.triplets_with_relation("purchase").count(), 1);
        assert_eq!(kg.triplets_with_relation("belongs_to").count(), 3);
        assert!(kg.validate_graph().is_empty());
        // Review body went to the side table, not the graph.
        assert_eq!(ctx.docs.len(), 1);
        assert!(kg.lookup("RelatedItem", "B9").is_some());
    }

    #[test]
    fn no_reviews_no_purchases() {
        let std = standard_metagraph();
        let mg = ingest_metagraph(&std, GraphVariant::Base).unwrap();
        let (kg, _) =
            build_base_graph(&[item("B1", &[])], &[], mg, &IngestOptions::default()).unwrap();
        assert_eq!(kg.triplets_with_relation("purchase").count(), 0);
    }

    #[test]
    fn purchase_count_is_distinct_pairs() {
        let reviews = vec![
            ReviewRecord { user_id: "U1".into(), item_id: "B1".into(), text: "a".into(), rating: None, timestamp: None },
            ReviewRecord { user_id: "U1".into(), item_id: "B1".into(), text: "b".into(), rating: None, timestamp: None },
            ReviewRecord { user_id: "U2".into(), item_id: "B1".into(), text: "c".into(), rating: None, timestamp: None },
        ];
        let std = standard_metagraph();
        let mg = ingest_metagraph(&std, GraphVariant::Base).unwrap();
        let (kg, _) =
            build_base_graph(&[item("B1", &[])], &reviews, mg, &IngestOptions::default()).unwrap();
        assert_eq!(kg.triplets_with_relation("purchase").count(), 2);
    }

    #[test]
    fn large_variant_links_review_words() {
        let reviews = vec![ReviewRecord {
            user_id: "U1".into(),
            item_id: "B1".into(),
            text: "very hydrating serum".into(),
            rating: None,
            timestamp: None,
        }];
        let std = standard_metagraph();
        let mg = ingest_metagraph(&std, GraphVariant::Large).unwrap();
        let opts = IngestOptions { variant: GraphVariant::Large, ..Default::default() };
        let (kg, _) = build_base_graph(&[item("B1", &[])], &reviews, mg, &opts).unwrap();
        // "very" is a stopword; "hydrating" and "serum" become Word entities.
        assert!(kg.lookup("Word", "hydrating").is_some());
        assert!(kg.lookup("Word", "serum").is_some());
        assert!(kg.lookup("Word", "very").is_none());
        assert_eq!(kg.triplets_with_relation("mention").count(), 2);
        assert_eq!(kg.triplets_with_relation("described_as").count(), 2);
        assert!(kg.validate_graph().is_empty());
    }

    #[test]
    fn in_catalog_related_aliases_item() {
        let mut a = item("B1", &[]);
        a.related.insert("also_viewed".into(), vec!["B2".into()]);
        let b = item("B2", &[]);
        let std = standard_metagraph();
        let mg = ingest_metagraph(&std, GraphVariant::Base).unwrap();
        let (kg, _) = build_base_graph(&[a, b], &[], mg, &IngestOptions::default()).unwrap();
        assert!(kg.lookup("RelatedItem", "B2").is_none());
        let b2 = kg.lookup("Item", "B2").unwrap();
        assert!(kg.triplets_to(b2).any(|t| t.relation == "also_viewed"));
    }

    #[test]
    fn review_cap_applies_in_file_order() {
        let reviews: Vec<ReviewRecord> = (0..5)
            .map(|i| ReviewRecord {
                user_id: format!("U{i}"),
                item_id: "B1".into(),
                text: format!("review {i}"),
                rating: None,
                timestamp: None,
            })
            .collect();
        let std = standard_metagraph();
        let mg = ingest_metagraph(&std, GraphVariant::Base).unwrap();
        let opts = IngestOptions { max_reviews_per_item: Some(2), ..Default::default() };
        let (kg, ctx) = build_base_graph(&[item("B1", &[])], &reviews, mg, &opts).unwrap();
        assert_eq!(kg.triplets_with_relation("purchase").count(), 2);
        assert_eq!(ctx.docs.len(), 2);
    }

    #[test]
    fn tokenizer_rules() {
        let sw = Stopwords::default();
        assert_eq!(tokenize("Very hydrating, hydrating serum! a it", &sw), ["hydrating", "serum"]);
    }
}
