//! Evaluation: interaction splitting, a deterministic graph-path recommender
//! baseline, and top-k ranking metrics.
//!
//! The recommender is intentionally simple and shared across graph variants,
//! so metric differences isolate what the graph's topology contributes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{EntityId, KnowledgeGraph};
use crate::metagraph::EntityClass;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("split ratio must be in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unknown user {0:?}")]
    UnknownUser(String),
}

/// Train/test user-item pairs under a fixed seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionSplit {
    pub train: BTreeSet<(String, String)>,
    pub test: BTreeSet<(String, String)>,
    pub seed: u64,
}

/// Distinct (user, item) purchase pairs of a graph, by external label.
pub fn purchases_from_graph(kg: &KnowledgeGraph) -> BTreeSet<(String, String)> {
    kg.triplets_with_relation("purchase")
        .filter_map(|t| {
            let user = kg.label_of(t.head)?;
            let item = kg.label_of(t.tail)?;
            Some((user.to_string(), item.to_string()))
        })
        .collect()
}

fn user_rng(seed: u64, user: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(user.as_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(word))
}

/// Per-user random split. Users with fewer than two interactions go entirely
/// to train; otherwise the train share is `round(ratio * n)` clamped to keep
/// at least one interaction on each side. Deterministic for a fixed seed,
/// independent of iteration order.
pub fn split_interactions(
    purchases: &BTreeSet<(String, String)>,
    ratio: f64,
    seed: u64,
) -> Result<InteractionSplit, EvalError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EvalError::InvalidRatio(ratio));
    }
    let mut by_user: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (user, item) in purchases {
        by_user.entry(user).or_default().push(item);
    }
    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    for (user, mut items) in by_user {
        items.sort();
        let n = items.len();
        if n < 2 {
            for item in items {
                train.insert((user.to_string(), item.to_string()));
            }
            continue;
        }
        let mut rng = user_rng(seed, user);
        items.shuffle(&mut rng);
        let train_count = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        for (idx, item) in items.into_iter().enumerate() {
            if idx < train_count {
                train.insert((user.to_string(), item.to_string()));
            } else {
                test.insert((user.to_string(), item.to_string()));
            }
        }
    }
    Ok(InteractionSplit { train, test, seed })
}

/// Read-only scoring view over the train graph: undirected adjacency with
/// held-out purchase edges removed.
pub struct Recommender<'a> {
    kg: &'a KnowledgeGraph,
    neighbors: Vec<Vec<EntityId>>,
    is_item: Vec<bool>,
    train_items_by_user: HashMap<EntityId, BTreeSet<EntityId>>,
    /// Items ranked by train popularity for optional backfill.
    popularity: Vec<EntityId>,
    backfill: bool,
}

impl<'a> Recommender<'a> {
    pub fn new(kg: &'a KnowledgeGraph, split: &InteractionSplit, backfill: bool) -> Self {
        let mut neighbors: Vec<Vec<EntityId>> = vec![Vec::new(); kg.entity_count()];
        let mut train_items_by_user: HashMap<EntityId, BTreeSet<EntityId>> = HashMap::new();
        let mut purchase_counts: HashMap<EntityId, usize> = HashMap::new();
        for t in kg.triplets() {
            if t.relation == "purchase" {
                let pair = (
                    kg.label_of(t.head).expect("registered").to_string(),
                    kg.label_of(t.tail).expect("registered").to_string(),
                );
                if !split.train.contains(&pair) {
                    continue;
                }
                train_items_by_user.entry(t.head).or_default().insert(t.tail);
                *purchase_counts.entry(t.tail).or_default() += 1;
            }
            neighbors[t.head.0 as usize].push(t.tail);
            neighbors[t.tail.0 as usize].push(t.head);
        }
        let is_item = kg
            .entity_ids()
            .map(|id| kg.class_of_entity(id) == Some(EntityClass::Item))
            .collect();
        let mut popularity: Vec<EntityId> = purchase_counts.keys().copied().collect();
        popularity.sort_by(|a, b| {
            purchase_counts[b]
                .cmp(&purchase_counts[a])
                .then_with(|| kg.label_of(*a).cmp(&kg.label_of(*b)))
        });
        Self { kg, neighbors, is_item, train_items_by_user, popularity, backfill }
    }

    fn degree(&self, id: EntityId) -> usize {
        self.neighbors[id.0 as usize].len()
    }

    fn is_item(&self, id: EntityId) -> bool {
        self.is_item[id.0 as usize]
    }

    /// Score every reachable item by paths of length at most three from the
    /// user, weighting each path by the product of 1/degree over its
    /// intermediate nodes; return the top-k item labels with train items
    /// excluded and ties broken by ascending item id.
    pub fn recommend(&self, user: &str, k: usize) -> Result<Vec<String>, EvalError> {
        let user_ent = self
            .kg
            .lookup("User", user)
            .filter(|id| self.train_items_by_user.contains_key(id))
            .ok_or_else(|| EvalError::UnknownUser(user.to_string()))?;
        let train_items = &self.train_items_by_user[&user_ent];

        let mut scores: HashMap<EntityId, f64> = HashMap::new();
        for &e1 in &self.neighbors[user_ent.0 as usize] {
            if e1 == user_ent {
                continue;
            }
            let w1 = 1.0 / self.degree(e1) as f64;
            for &e2 in &self.neighbors[e1.0 as usize] {
                if e2 == user_ent || e2 == e1 {
                    continue;
                }
                if self.is_item(e2) && !train_items.contains(&e2) {
                    *scores.entry(e2).or_default() += w1;
                }
                let w2 = w1 / self.degree(e2) as f64;
                for &e3 in &self.neighbors[e2.0 as usize] {
                    if e3 == user_ent || e3 == e1 || e3 == e2 {
                        continue;
                    }
                    if self.is_item(e3) && !train_items.contains(&e3) {
                        *scores.entry(e3).or_default() += w2;
                    }
                }
            }
        }

        let mut ranked: Vec<(EntityId, f64)> = scores.into_iter().collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then_with(|| self.kg.label_of(a.0).cmp(&self.kg.label_of(b.0)))
        });
        let mut out: Vec<String> = ranked
            .into_iter()
            .take(k)
            .map(|(id, _)| self.kg.label_of(id).expect("registered").to_string())
            .collect();

        if self.backfill && out.len() < k {
            let mut have: BTreeSet<String> = out.iter().cloned().collect();
            for &id in &self.popularity {
                if out.len() >= k {
                    break;
                }
                let lab = self.kg.label_of(id).expect("registered");
                if train_items.contains(&id) || have.contains(lab) {
                    continue;
                }
                have.insert(lab.to_string());
                out.push(lab.to_string());
            }
        }
        Ok(out)
    }
}

/// One user's ranked list and relevant set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedUser {
    pub user: String,
    pub recommended: Vec<String>,
    pub relevant: BTreeSet<String>,
}

/// Aggregate metrics at k, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ndcg: f64,
    pub recall: f64,
    pub precision: f64,
    pub hit_ratio: f64,
    pub users_evaluated: usize,
}

/// Per-user metric terms, exposed for the metric identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetrics {
    pub ndcg: f64,
    pub recall: f64,
    pub precision: f64,
    pub hit: bool,
    pub hits: usize,
}

/// Binary-relevance metrics for one ranked list.
pub fn user_metrics(recommended: &[String], relevant: &BTreeSet<String>, k: usize) -> UserMetrics {
    debug_assert!(k >= 1);
    debug_assert!(!relevant.is_empty());
    let top: Vec<&String> = recommended.iter().take(k).collect();
    let mut hits = 0usize;
    let mut dcg = 0.0;
    for (idx, item) in top.iter().enumerate() {
        if relevant.contains(*item) {
            hits += 1;
            let rank = idx + 1;
            dcg += 1.0 / ((rank + 1) as f64).log2();
        }
    }
    let ideal = k.min(relevant.len());
    let idcg: f64 = (1..=ideal).map(|rank| 1.0 / ((rank + 1) as f64).log2()).sum();
    UserMetrics {
        ndcg: if idcg > 0.0 { dcg / idcg } else { 0.0 },
        recall: hits as f64 / relevant.len() as f64,
        precision: hits as f64 / k as f64,
        hit: hits >= 1,
        hits,
    }
}

/// Averages over users with non-empty relevant sets; users with empty
/// relevant sets are excluded.
pub fn evaluate_ranking(results: &[RankedUser], k: usize) -> Result<Metrics, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let mut sum_ndcg = 0.0;
    let mut sum_recall = 0.0;
    let mut sum_precision = 0.0;
    let mut sum_hits = 0.0;
    let mut evaluated = 0usize;
    for r in results {
        if r.relevant.is_empty() {
            continue;
        }
        let m = user_metrics(&r.recommended, &r.relevant, k);
        sum_ndcg += m.ndcg;
        sum_recall += m.recall;
        sum_precision += m.precision;
        sum_hits += if m.hit { 1.0 } else { 0.0 };
        evaluated += 1;
    }
    let denom = evaluated.max(1) as f64;
    Ok(Metrics {
        ndcg: sum_ndcg / denom,
        recall: sum_recall / denom,
        precision: sum_precision / denom,
        hit_ratio: sum_hits / denom,
        users_evaluated: evaluated,
    })
}

/// Full evaluation report, JSON-serializable for the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub metrics: Metrics,
    pub k: usize,
    pub ratio: f64,
    pub seed: u64,
    /// The split is a stand-in protocol, recorded so numbers are not
    /// mistaken for a reproduction of any published setup.
    pub split_protocol: String,
}

/// Split, recommend for every test user, and aggregate metrics.
pub fn evaluate_graph(
    kg: &KnowledgeGraph,
    ratio: f64,
    seed: u64,
    k: usize,
    backfill: bool,
) -> Result<EvalReport, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let purchases = purchases_from_graph(kg);
    let split = split_interactions(&purchases, ratio, seed)?;
    let recommender = Recommender::new(kg, &split, backfill);

    let mut relevant_by_user: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for (user, item) in &split.test {
        relevant_by_user.entry(user).or_default().insert(item.clone());
    }
    let users: Vec<(&str, BTreeSet<String>)> = relevant_by_user.into_iter().collect();
    let results: Vec<RankedUser> = users
        .into_par_iter()
        .map(|(user, relevant)| {
            let recommended = recommender.recommend(user, k).unwrap_or_default();
            RankedUser { user: user.to_string(), recommended, relevant }
        })
        .collect();
    let metrics = evaluate_ranking(&results, k)?;
    Ok(EvalReport {
        metrics,
        k,
        ratio,
        seed,
        split_protocol: "per-user random holdout".to_string(),
    })
}
