//! Stage orchestration behind the CLI: each function reads and writes the
//! flat-file artifacts one subcommand owns, so stages chain through
//! directories and stay individually resumable.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::backend::TopicBackend;
use crate::checkpoint::{fingerprint, Checkpoint};
use crate::eval::{evaluate_graph, EvalError, EvalReport};
use crate::general::{extract_subtypes, save_category_trees, GeneralError};
use crate::graph::{EntityId, GraphError, GraphStats};
use crate::graph_io::{export_graph, import_graph, GraphIoError};
use crate::ingest::{
    build_base_graph, build_type_tree, ingest_metagraph, parse_item_metadata, parse_reviews,
    ContextStore, IngestError, IngestOptions, ItemRecord, TypeLeaf,
};
use crate::metagraph::{Metagraph, MetagraphError};
use crate::refine::{
    apply_canonical_map, refine_topics, save_canonical_map, save_partition, topic_partition,
    RefineError,
};
use crate::specific::{
    extract_candidate_words, CandidateWordTable, SpecificError, StagedTopicEdge, TopicRelation,
};

pub const ITEMS_FILE: &str = "items.jsonl";
pub const CONTEXT_FILE: &str = "context.jsonl";
pub const TYPE_TREE_FILE: &str = "type_tree.json";
pub const CATEGORY_TREES_FILE: &str = "category_trees.json";
pub const CANDIDATES_FILE: &str = "candidates.tsv";
pub const STAGED_EDGES_FILE: &str = "staged_edges.tsv";
pub const PARTITION_FILE: &str = "partition.json";
pub const CANONICAL_MAP_FILE: &str = "canonical_map.tsv";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    GraphIo(#[from] GraphIoError),
    #[error(transparent)]
    General(#[from] GeneralError),
    #[error(transparent)]
    Specific(#[from] SpecificError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Metagraph(#[from] MetagraphError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{file}: {message}")]
    Format { file: String, message: String },
    #[error("graph has {violations} metagraph violation(s)")]
    Validation { violations: usize },
}

impl PipelineError {
    /// Whether the failure originated in the topic backend.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            PipelineError::General(GeneralError::Backend { .. })
                | PipelineError::Specific(SpecificError::Backend { .. })
                | PipelineError::Refine(RefineError::Backend { .. })
        )
    }
}

fn format_err(file: &Path, message: impl Into<String>) -> PipelineError {
    PipelineError::Format { file: file.display().to_string(), message: message.into() }
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct IngestSummary {
    pub items: usize,
    pub reviews: usize,
    pub malformed_items: usize,
    pub malformed_reviews: usize,
    pub entities: usize,
    pub triplets: usize,
    pub leaves: usize,
}

pub fn run_ingest(
    metadata_path: &Path,
    reviews_path: &Path,
    standard: &Metagraph,
    options: &IngestOptions,
    out_dir: &Path,
) -> Result<IngestSummary, PipelineError> {
    let items = parse_item_metadata(BufReader::new(fs::File::open(metadata_path)?))?;
    let reviews = parse_reviews(BufReader::new(fs::File::open(reviews_path)?))?;
    let metagraph = ingest_metagraph(standard, options.variant)?;
    let (kg, context) = build_base_graph(&items.records, &reviews.records, metagraph, options)?;
    let tree = build_type_tree(&items.records);
    let leaves = tree.leaves();

    fs::create_dir_all(out_dir)?;
    export_graph(&kg, out_dir)?;
    save_items(&items.records, &out_dir.join(ITEMS_FILE))?;
    context.save(&out_dir.join(CONTEXT_FILE))?;
    save_leaves(&leaves, &out_dir.join(TYPE_TREE_FILE))?;

    Ok(IngestSummary {
        items: items.records.len(),
        reviews: reviews.records.len(),
        malformed_items: items.malformed_count,
        malformed_reviews: reviews.malformed_count,
        entities: kg.entity_count(),
        triplets: kg.triplet_count(),
        leaves: leaves.len(),
    })
}

fn save_items(items: &[ItemRecord], path: &Path) -> Result<(), PipelineError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn load_items(path: &Path) -> Result<BTreeMap<String, ItemRecord>, PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut items = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let record: ItemRecord =
            serde_json::from_str(line).map_err(|e| format_err(path, e.to_string()))?;
        items.insert(record.item_id.clone(), record);
    }
    Ok(items)
}

fn save_leaves(leaves: &[TypeLeaf], path: &Path) -> Result<(), PipelineError> {
    fs::write(path, serde_json::to_string_pretty(leaves).expect("leaves serialize"))?;
    Ok(())
}

fn load_leaves(path: &Path) -> Result<Vec<TypeLeaf>, PipelineError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

fn copy_sidecars(from: &Path, to: &Path) -> Result<(), PipelineError> {
    for file in [ITEMS_FILE, CONTEXT_FILE, TYPE_TREE_FILE] {
        let src = from.join(file);
        if src.is_file() {
            fs::copy(&src, to.join(file))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// General topics
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct GeneralSummary {
    pub leaves: usize,
    pub subtype_entities: usize,
    pub related_to_triplets: usize,
    pub backend_calls: usize,
}

pub fn run_extract_general<B: TopicBackend>(
    in_dir: &Path,
    out_dir: &Path,
    checkpoint_path: Option<&Path>,
    backend: &B,
) -> Result<GeneralSummary, PipelineError> {
    let mut kg = import_graph(in_dir)?;
    let items = load_items(&in_dir.join(ITEMS_FILE))?;
    let leaves = load_leaves(&in_dir.join(TYPE_TREE_FILE))?;

    let mut checkpoint = match checkpoint_path {
        Some(path) => {
            let mut bytes = fs::read(in_dir.join(TYPE_TREE_FILE))?;
            bytes.extend(fs::read(in_dir.join(crate::graph_io::ENTITIES_FILE))?);
            Checkpoint::load_or_new(path, fingerprint(&bytes))
        }
        None => Checkpoint::ephemeral(),
    };

    let extraction = extract_subtypes(&mut kg, &leaves, &items, backend, &mut checkpoint)?;

    fs::create_dir_all(out_dir)?;
    export_graph(&kg, out_dir)?;
    save_category_trees(&extraction.trees, &out_dir.join(CATEGORY_TREES_FILE))?;
    copy_sidecars(in_dir, out_dir)?;

    Ok(GeneralSummary {
        leaves: leaves.len(),
        subtype_entities: kg.entities_of_type(crate::metagraph::SUBTYPE_TYPE).count(),
        related_to_triplets: kg.triplets_with_relation(crate::metagraph::RELATED_TO).count(),
        backend_calls: extraction.calls_made,
    })
}

// ---------------------------------------------------------------------------
// Specific topics
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct SpecificSummary {
    pub documents: usize,
    pub skipped_empty: usize,
    pub candidate_labels: usize,
    pub staged_edges: usize,
    pub backend_calls: usize,
}

pub fn run_extract_specific<B: TopicBackend>(
    graph_dir: &Path,
    context_path: &Path,
    staged_dir: &Path,
    checkpoint_path: Option<&Path>,
    backend: &B,
) -> Result<SpecificSummary, PipelineError> {
    let kg = import_graph(graph_dir)?;
    let context = ContextStore::load(context_path)?;

    let mut checkpoint = match checkpoint_path {
        Some(path) => Checkpoint::load_or_new(path, fingerprint(&fs::read(context_path)?)),
        None => Checkpoint::ephemeral(),
    };
    let extraction = extract_candidate_words(&kg, &context, backend, &mut checkpoint)?;

    fs::create_dir_all(staged_dir)?;
    save_candidates(&extraction.table, &staged_dir.join(CANDIDATES_FILE))?;
    save_staged_edges(&extraction.staged, &staged_dir.join(STAGED_EDGES_FILE))?;

    Ok(SpecificSummary {
        documents: context.docs.len(),
        skipped_empty: extraction.skipped_empty,
        candidate_labels: extraction.table.len(),
        staged_edges: extraction.staged.len(),
        backend_calls: extraction.calls_made,
    })
}

fn save_candidates(table: &CandidateWordTable, path: &Path) -> Result<(), PipelineError> {
    let mut file = fs::File::create(path)?;
    for (label, entry) in table.iter() {
        writeln!(file, "{label}\t{}", entry.frequency)?;
    }
    Ok(())
}

fn load_candidates(path: &Path) -> Result<CandidateWordTable, PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut table = CandidateWordTable::default();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (label, freq) = line
            .rsplit_once('\t')
            .ok_or_else(|| format_err(path, "expected label\\tfrequency"))?;
        let freq: u64 =
            freq.parse().map_err(|_| format_err(path, "non-numeric frequency"))?;
        table.set_frequency(label, freq);
    }
    Ok(table)
}

fn save_staged_edges(
    staged: &BTreeSet<StagedTopicEdge>,
    path: &Path,
) -> Result<(), PipelineError> {
    let mut file = fs::File::create(path)?;
    for edge in staged {
        writeln!(file, "{}\t{}\t{}", edge.head, edge.relation.as_str(), edge.label)?;
    }
    Ok(())
}

fn load_staged_edges(path: &Path) -> Result<Vec<StagedTopicEdge>, PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let mut parts = line.splitn(3, '\t');
        let (head, relation, label) = match (parts.next(), parts.next(), parts.next()) {
            (Some(h), Some(r), Some(l)) => (h, r, l),
            _ => return Err(format_err(path, "expected head\\trelation\\tlabel")),
        };
        let head: u32 = head.parse().map_err(|_| format_err(path, "non-numeric head id"))?;
        let relation = TopicRelation::parse(relation)
            .ok_or_else(|| format_err(path, format!("unknown topic relation {relation:?}")))?;
        edges.push(StagedTopicEdge { head: EntityId(head), relation, label: label.to_string() });
    }
    Ok(edges)
}

// ---------------------------------------------------------------------------
// Refine
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct RefineSummary {
    pub candidate_labels: usize,
    pub word_entities: usize,
    pub subsets: usize,
    pub inserted_triplets: usize,
    pub collapsed_duplicates: usize,
    pub repairs_applied: usize,
    pub backend_calls: usize,
}

pub fn run_refine<B: TopicBackend>(
    staged_dir: &Path,
    graph_dir: &Path,
    out_dir: &Path,
    max_subset: usize,
    checkpoint_path: Option<&Path>,
    backend: &B,
) -> Result<RefineSummary, PipelineError> {
    let candidates_path = staged_dir.join(CANDIDATES_FILE);
    let table = load_candidates(&candidates_path)?;
    let staged = load_staged_edges(&staged_dir.join(STAGED_EDGES_FILE))?;

    let labels: Vec<String> = table.labels().map(str::to_string).collect();
    let partition = topic_partition(labels.clone(), max_subset);

    let mut checkpoint = match checkpoint_path {
        Some(path) => {
            let mut bytes = fs::read(&candidates_path)?;
            bytes.extend(max_subset.to_le_bytes());
            Checkpoint::load_or_new(path, fingerprint(&bytes))
        }
        None => Checkpoint::ephemeral(),
    };
    let refined = refine_topics(&table, &partition, backend, &mut checkpoint)?;

    let mut kg = import_graph(graph_dir)?;
    let applied = apply_canonical_map(staged.iter(), &refined.map, &mut kg)?;

    fs::create_dir_all(out_dir)?;
    export_graph(&kg, out_dir)?;
    save_partition(&partition, &out_dir.join(PARTITION_FILE))?;
    save_canonical_map(&refined.map, &table, &out_dir.join(CANONICAL_MAP_FILE))?;

    Ok(RefineSummary {
        candidate_labels: labels.len(),
        word_entities: applied.word_entities,
        subsets: partition.len(),
        inserted_triplets: applied.inserted,
        collapsed_duplicates: applied.collapsed,
        repairs_applied: refined.repairs.missing_restored
            + refined.repairs.duplicates_dropped
            + refined.repairs.unknown_dropped,
        backend_calls: refined.calls_made,
    })
}

// ---------------------------------------------------------------------------
// Validate / stats / eval
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct ValidateSummary {
    pub triplets: usize,
    pub violations: usize,
}

pub fn run_validate(graph_dir: &Path) -> Result<ValidateSummary, PipelineError> {
    let kg = crate::graph_io::import_graph_unchecked(graph_dir)?;
    let report = kg.validate_graph();
    for violation in report.iter().take(10) {
        eprintln!(
            "violation: ({}, {}, {}) needs triplet type {}",
            violation.triplet.head,
            violation.triplet.relation,
            violation.triplet.tail,
            violation.triplet_type
        );
    }
    Ok(ValidateSummary { triplets: kg.triplet_count(), violations: report.len() })
}

pub fn run_stats(graph_dir: &Path) -> Result<GraphStats, PipelineError> {
    Ok(import_graph(graph_dir)?.stats())
}

pub fn run_eval(
    graph_dir: &Path,
    ratio: f64,
    seed: u64,
    k: usize,
    backfill: bool,
) -> Result<EvalReport, PipelineError> {
    let kg = import_graph(graph_dir)?;
    Ok(evaluate_graph(&kg, ratio, seed, k, backfill)?)
}

// ---------------------------------------------------------------------------
// run-all
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct RunAllConfig {
    pub metadata: PathBuf,
    pub reviews: PathBuf,
    pub out_root: PathBuf,
    pub standard: Metagraph,
    pub ingest: IngestOptions,
    pub max_subset: usize,
    pub ratio: f64,
    pub seed: u64,
    pub k: usize,
    pub backfill: bool,
}

#[derive(Debug, Serialize)]
pub struct RunAllSummary {
    pub ingest: IngestSummary,
    pub general: GeneralSummary,
    pub specific: SpecificSummary,
    pub refine: RefineSummary,
    pub stats: GraphStats,
    pub eval: EvalReport,
}

/// Directory layout produced under the run-all output root.
pub mod layout {
    pub const INGEST_DIR: &str = "ingest";
    pub const GENERAL_DIR: &str = "general";
    pub const STAGED_DIR: &str = "staged";
    pub const FINAL_DIR: &str = "final";
    pub const CHECKPOINT_DIR: &str = "checkpoints";
    pub const STATS_FILE: &str = "stats.json";
    pub const EVAL_FILE: &str = "eval.json";
}

pub fn run_all<B: TopicBackend>(
    cfg: &RunAllConfig,
    backend: &B,
) -> Result<RunAllSummary, PipelineError> {
    let root = &cfg.out_root;
    let ingest_dir = root.join(layout::INGEST_DIR);
    let general_dir = root.join(layout::GENERAL_DIR);
    let staged_dir = root.join(layout::STAGED_DIR);
    let final_dir = root.join(layout::FINAL_DIR);
    let ck_dir = root.join(layout::CHECKPOINT_DIR);
    fs::create_dir_all(&ck_dir)?;

    let ingest =
        run_ingest(&cfg.metadata, &cfg.reviews, &cfg.standard, &cfg.ingest, &ingest_dir)?;
    let general = run_extract_general(
        &ingest_dir,
        &general_dir,
        Some(&ck_dir.join("general.json")),
        backend,
    )?;
    let specific = run_extract_specific(
        &general_dir,
        &general_dir.join(CONTEXT_FILE),
        &staged_dir,
        Some(&ck_dir.join("specific.json")),
        backend,
    )?;
    let refine = run_refine(
        &staged_dir,
        &general_dir,
        &final_dir,
        cfg.max_subset,
        Some(&ck_dir.join("refine.json")),
        backend,
    )?;

    let validation = run_validate(&final_dir)?;
    if validation.violations > 0 {
        return Err(PipelineError::Validation { violations: validation.violations });
    }

    let stats = run_stats(&final_dir)?;
    fs::write(
        root.join(layout::STATS_FILE),
        serde_json::to_string_pretty(&stats).expect("stats serialize"),
    )?;
    let eval = run_eval(&final_dir, cfg.ratio, cfg.seed, cfg.k, cfg.backfill)?;
    fs::write(
        root.join(layout::EVAL_FILE),
        serde_json::to_string_pretty(&eval).expect("eval serializes"),
    )?;

    Ok(RunAllSummary { ingest, general, specific, refine, stats, eval })
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    subcommand: &'a str,
    inputs: BTreeMap<String, String>,
    params: serde_json::Value,
}

/// Record input hashes, parameters, and tool version next to a subcommand's
/// outputs.
pub fn write_manifest(
    dir: &Path,
    tool: &str,
    version: &str,
    subcommand: &str,
    inputs: &[(&str, &Path)],
    params: serde_json::Value,
) -> Result<(), PipelineError> {
    let mut hashed = BTreeMap::new();
    for (name, path) in inputs {
        let digest = fingerprint(&fs::read(path)?);
        hashed.insert(name.to_string(), digest);
    }
    let manifest = Manifest { tool, version, subcommand, inputs: hashed, params };
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}
