//! Flat-file graph persistence.
//!
//! A graph directory holds `metagraph.json` (the schema config),
//! `entities.tsv` (id, type, label) and `triplets.tsv` (head_id, relation,
//! tail_id) — tab-separated UTF-8, one record per line, no header. Export
//! order is deterministic: entities by id, triplets sorted.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::graph::{EntityId, KnowledgeGraph, Triplet};
use crate::metagraph::{MetagraphConfig, MetagraphError};

pub const ENTITIES_FILE: &str = "entities.tsv";
pub const TRIPLETS_FILE: &str = "triplets.tsv";
pub const METAGRAPH_FILE: &str = "metagraph.json";

#[derive(Debug, Error)]
pub enum GraphIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: usize, message: String },
    #[error(transparent)]
    Metagraph(#[from] MetagraphError),
    #[error("graph error: {0}")]
    Graph(#[from] crate::graph::GraphError),
}

/// Write metagraph.json, entities.tsv, and triplets.tsv into `dir`.
pub fn export_graph(kg: &KnowledgeGraph, dir: &Path) -> Result<(), GraphIoError> {
    fs::create_dir_all(dir)?;
    let config = MetagraphConfig::from_metagraph(kg.metagraph());
    fs::write(dir.join(METAGRAPH_FILE), config.to_json_pretty())?;

    let mut ents = fs::File::create(dir.join(ENTITIES_FILE))?;
    for id in kg.entity_ids() {
        let e = kg.entity(id).expect("dense ids");
        writeln!(ents, "{}\t{}\t{}", e.id, e.entity_type, e.label)?;
    }

    let mut sorted: Vec<&Triplet> = kg.triplets().collect();
    sorted.sort();
    let mut trips = fs::File::create(dir.join(TRIPLETS_FILE))?;
    for t in sorted {
        writeln!(trips, "{}\t{}\t{}", t.head, t.relation, t.tail)?;
    }
    Ok(())
}

/// Rebuild a graph from a directory written by [`export_graph`].
///
/// Strict: a triplet line violating the metagraph is an error. The audit
/// path, [`import_graph_unchecked`], loads it anyway so `validate` can
/// report it.
pub fn import_graph(dir: &Path) -> Result<KnowledgeGraph, GraphIoError> {
    import_impl(dir, false)
}

/// Load without the conformance gate; pair with
/// [`KnowledgeGraph::validate_graph`].
pub fn import_graph_unchecked(dir: &Path) -> Result<KnowledgeGraph, GraphIoError> {
    import_impl(dir, true)
}

fn import_impl(dir: &Path, lenient: bool) -> Result<KnowledgeGraph, GraphIoError> {
    let metagraph = MetagraphConfig::load(&dir.join(METAGRAPH_FILE))?.build()?;
    let mut kg = KnowledgeGraph::new(metagraph);

    let ent_path = dir.join(ENTITIES_FILE);
    let reader = BufReader::new(fs::File::open(&ent_path)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (id, entity_type, label) = match (parts.next(), parts.next(), parts.next()) {
            (Some(id), Some(t), Some(l)) => (id, t, l),
            _ => {
                return Err(malformed(&ent_path, lineno, "expected id\\ttype\\tlabel"));
            }
        };
        let id: u32 = id
            .parse()
            .map_err(|_| malformed(&ent_path, lineno, "non-numeric entity id"))?;
        let assigned = kg.register_entity(label, entity_type)?;
        if assigned != EntityId(id) {
            return Err(malformed(
                &ent_path,
                lineno,
                "entity ids must be dense and in file order",
            ));
        }
    }

    let trip_path = dir.join(TRIPLETS_FILE);
    let reader = BufReader::new(fs::File::open(&trip_path)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (head, relation, tail) = match (parts.next(), parts.next(), parts.next()) {
            (Some(h), Some(r), Some(t)) => (h, r, t),
            _ => return Err(malformed(&trip_path, lineno, "expected head\\trelation\\ttail")),
        };
        let head: u32 = head
            .parse()
            .map_err(|_| malformed(&trip_path, lineno, "non-numeric head id"))?;
        let tail: u32 = tail
            .parse()
            .map_err(|_| malformed(&trip_path, lineno, "non-numeric tail id"))?;
        let triplet = Triplet::new(EntityId(head), relation, EntityId(tail));
        if lenient {
            // Entity ids must still resolve; only the conformance gate is off.
            if head as usize >= kg.entity_count() || tail as usize >= kg.entity_count() {
                return Err(malformed(&trip_path, lineno, "entity id out of range"));
            }
            kg.add_triplet_unchecked(triplet);
        } else {
            kg.add_triplet(triplet)?;
        }
    }
    Ok(kg)
}

fn malformed(path: &Path, lineno: usize, message: &str) -> GraphIoError {
    GraphIoError::Malformed {
        file: path.display().to_string(),
        line: lineno + 1,
        message: message.to_string(),
    }
}
