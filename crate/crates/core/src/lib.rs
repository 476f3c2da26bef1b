//! Topic-aware knowledge graph construction for recommender systems.
//!
//! The crate builds a typed knowledge graph from item metadata and user
//! reviews, enforces a standardized metagraph over every edge, extracts
//! general topics (subtypes) and specific topics (words) through a pluggable
//! text-understanding backend, refines synonymous topics with a recursive
//! prefix partition, and evaluates graph variants with top-k ranking metrics.

pub mod backend;
pub mod checkpoint;
pub mod eval;
pub mod general;
pub mod graph;
pub mod graph_io;
pub mod ingest;
pub mod label;
pub mod metagraph;
pub mod pipeline;
pub mod refine;
pub mod specific;

pub use graph::{AddResult, Entity, EntityId, GraphError, GraphStats, KnowledgeGraph, Triplet};
pub use metagraph::{EntityClass, Metagraph, MetagraphError, TripletType};
