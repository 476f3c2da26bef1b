//! Pipeline CLI: ingest -> extract-general -> extract-specific -> refine ->
//! validate -> stats -> eval, plus a run-all composite.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 backend, 5 validation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use topikg_core::backend::{BackendConfig, CachedBackend, HttpBackend, MockBackend, TopicBackend};
use topikg_core::graph::GraphError;
use topikg_core::ingest::{GraphVariant, IngestError, IngestOptions, Stopwords};
use topikg_core::metagraph::{standard_metagraph, Metagraph, MetagraphConfig};
use topikg_core::pipeline::{self, PipelineError, RunAllConfig};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "topikg", version, about = "Topic-aware knowledge graph pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Base,
    Large,
}

impl From<VariantArg> for GraphVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Base => GraphVariant::Base,
            VariantArg::Large => GraphVariant::Large,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

/// Backend flags shared by the extraction stages. Precedence:
/// flags > environment > config file > defaults.
#[derive(Args, Debug, Clone)]
struct BackendArgs {
    /// Backend implementation.
    #[arg(long, value_enum, env = "TOPIKG_BACKEND")]
    backend: Option<BackendKind>,
    /// Model name sent to the HTTP backend (and folded into cache keys).
    #[arg(long, env = "TOPIKG_MODEL")]
    model: Option<String>,
    /// Chat-completions endpoint URL.
    #[arg(long, env = "TOPIKG_ENDPOINT")]
    endpoint: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, env = "TOPIKG_API_KEY_ENV")]
    api_key_env: Option<String>,
    /// Response cache directory.
    #[arg(long, env = "TOPIKG_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Maximum in-flight backend requests and worker threads.
    #[arg(long, env = "TOPIKG_PARALLELISM")]
    parallelism: Option<usize>,
    /// Request timeout in seconds.
    #[arg(long, env = "TOPIKG_TIMEOUT_SECS")]
    timeout_secs: Option<u64>,
    /// Transport retries before giving up.
    #[arg(long, env = "TOPIKG_MAX_RETRIES")]
    max_retries: Option<u32>,
    /// Cap on specific topics per document.
    #[arg(long, env = "TOPIKG_MAX_WORDS")]
    max_words: Option<usize>,
    /// Directory with prompt template overrides.
    #[arg(long, env = "TOPIKG_PROMPTS")]
    prompts: Option<PathBuf>,
    /// JSON config file supplying any of the above.
    #[arg(long, env = "TOPIKG_CONFIG")]
    config: Option<PathBuf>,
}

/// Optional file-level settings, applied beneath flags and environment.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    backend: Option<String>,
    model: Option<String>,
    endpoint: Option<String>,
    api_key_env: Option<String>,
    cache_dir: Option<PathBuf>,
    parallelism: Option<usize>,
    timeout_secs: Option<u64>,
    max_retries: Option<u32>,
    max_words: Option<usize>,
    prompts: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MetagraphArg {
    /// Metagraph config JSON; the bundled standard applies when omitted.
    #[arg(long)]
    metagraph: Option<PathBuf>,
}

impl MetagraphArg {
    fn load(&self) -> Result<Metagraph, CliError> {
        match &self.metagraph {
            None => Ok(standard_metagraph()),
            Some(path) => Ok(MetagraphConfig::load(path)
                .map_err(PipelineError::Metagraph)?
                .build()
                .map_err(PipelineError::Metagraph)?),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse metadata and reviews into the base graph plus side tables.
    Ingest {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        reviews: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        metagraph: MetagraphArg,
        #[arg(long, value_enum, default_value = "base")]
        variant: VariantArg,
        /// Extra stopwords, one per line, added to the bundled list.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        max_reviews_per_item: Option<usize>,
    },
    /// Extract one subtype per (item, leaf) via the backend.
    ExtractGeneral {
        #[arg(long = "in")]
        in_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Extract specific topics from every context document.
    ExtractSpecific {
        #[arg(long = "in")]
        in_dir: PathBuf,
        /// Context store; defaults to context.jsonl inside --in.
        #[arg(long)]
        context: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Partition candidates, group synonyms, and materialize topic edges.
    Refine {
        #[arg(long)]
        staged: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Largest subset handed to one synonym-grouping call.
        #[arg(long, default_value_t = 50)]
        max_subset: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Audit every triplet against the metagraph.
    Validate {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Table-style counts for a graph, as JSON.
    Stats {
        #[arg(long)]
        graph: PathBuf,
        /// Also write the JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split interactions, run the baseline recommender, report metrics.
    Eval {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Pad short recommendation lists with train-popular items.
        #[arg(long)]
        backfill: bool,
    },
    /// The full pipeline under one output root.
    RunAll {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        reviews: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        metagraph: MetagraphArg,
        #[arg(long, value_enum, default_value = "base")]
        variant: VariantArg,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        max_reviews_per_item: Option<usize>,
        #[arg(long, default_value_t = 50)]
        max_subset: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        backfill: bool,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Debug)]
enum CliError {
    Pipeline(PipelineError),
    Backend(topikg_core::backend::BackendError),
    Config(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Pipeline(e) => write!(f, "{e}"),
            CliError::Backend(e) => write!(f, "{e}"),
            CliError::Config(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Backend(_) => 4,
            CliError::Pipeline(e) => {
                if e.is_backend() {
                    return 4;
                }
                match e {
                    PipelineError::Validation { .. } => 5,
                    PipelineError::Graph(GraphError::NonConformingTriplet(_)) => 5,
                    PipelineError::Ingest(IngestError::Graph(
                        GraphError::NonConformingTriplet(_),
                    )) => 5,
                    _ => 3,
                }
            }
        }
    }
}

fn resolve_backend_config(args: &BackendArgs) -> Result<(BackendKind, BackendConfig), CliError> {
    let file: FileConfig = match &args.config {
        None => FileConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    let kind = match (&args.backend, file.backend.as_deref()) {
        (Some(k), _) => *k,
        (None, Some("mock")) => BackendKind::Mock,
        (None, Some("http")) => BackendKind::Http,
        (None, Some(other)) => {
            return Err(CliError::Config(format!("unknown backend {other:?} in config file")))
        }
        (None, None) => BackendKind::Mock,
    };
    let defaults = BackendConfig::default();
    let config = BackendConfig {
        endpoint: args.endpoint.clone().or(file.endpoint).unwrap_or(defaults.endpoint),
        model: args.model.clone().or(file.model).unwrap_or(defaults.model),
        api_key_env: args.api_key_env.clone().or(file.api_key_env).unwrap_or(defaults.api_key_env),
        timeout_secs: args.timeout_secs.or(file.timeout_secs).unwrap_or(defaults.timeout_secs),
        max_retries: args.max_retries.or(file.max_retries).unwrap_or(defaults.max_retries),
        max_parallel: args.parallelism.or(file.parallelism).unwrap_or(defaults.max_parallel),
        cache_dir: args.cache_dir.clone().or(file.cache_dir),
        max_words: args.max_words.or(file.max_words).unwrap_or(defaults.max_words),
        prompt_dir: args.prompts.clone().or(file.prompts),
    };
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok((kind, config))
}

fn make_backend(args: &BackendArgs) -> Result<Arc<dyn TopicBackend>, CliError> {
    let (kind, config) = resolve_backend_config(args)?;
    if let Some(parallelism) = args.parallelism {
        // Worker pool size; stages parallelize through it. A pool may
        // already exist on repeated initialization; that is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(parallelism).build_global();
    }
    let cache_dir = config.cache_dir.clone();
    let base: Arc<dyn TopicBackend> = match kind {
        BackendKind::Mock => Arc::new(MockBackend::new()),
        BackendKind::Http => Arc::new(HttpBackend::new(config).map_err(CliError::Backend)?),
    };
    Ok(match cache_dir {
        Some(dir) => Arc::new(CachedBackend::new(base, dir).map_err(CliError::Backend)?),
        None => base,
    })
}

fn ingest_options(
    variant: VariantArg,
    stopwords: &Option<PathBuf>,
    max_reviews_per_item: Option<usize>,
) -> Result<IngestOptions, CliError> {
    let stopwords = match stopwords {
        None => Stopwords::default(),
        Some(path) => Stopwords::load_extra(path).map_err(PipelineError::Ingest)?,
    };
    Ok(IngestOptions { variant: variant.into(), max_reviews_per_item, stopwords })
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("summary serializes"));
}

fn graph_inputs(dir: &Path) -> Vec<(&'static str, PathBuf)> {
    vec![
        ("metagraph", dir.join("metagraph.json")),
        ("entities", dir.join("entities.tsv")),
        ("triplets", dir.join("triplets.tsv")),
    ]
}

fn manifest(
    dir: &Path,
    subcommand: &str,
    inputs: &[(&str, PathBuf)],
    params: serde_json::Value,
) -> Result<(), CliError> {
    let borrowed: Vec<(&str, &Path)> = inputs.iter().map(|(n, p)| (*n, p.as_path())).collect();
    pipeline::write_manifest(dir, "topikg", VERSION, subcommand, &borrowed, params)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            metadata,
            reviews,
            out,
            metagraph,
            variant,
            stopwords,
            max_reviews_per_item,
        } => {
            let standard = metagraph.load()?;
            let options = ingest_options(variant, &stopwords, max_reviews_per_item)?;
            let summary = pipeline::run_ingest(&metadata, &reviews, &standard, &options, &out)?;
            manifest(
                &out,
                "ingest",
                &[("metadata", metadata.clone()), ("reviews", reviews.clone())],
                json!({
                    "variant": format!("{variant:?}").to_lowercase(),
                    "max_reviews_per_item": max_reviews_per_item,
                }),
            )?;
            print_json(&summary);
            Ok(())
        }
        Command::ExtractGeneral { in_dir, out, checkpoint, backend } => {
            let b = make_backend(&backend)?;
            let summary = pipeline::run_extract_general(&in_dir, &out, checkpoint.as_deref(), &b)?;
            let mut inputs = graph_inputs(&in_dir);
            inputs.push(("type_tree", in_dir.join(pipeline::TYPE_TREE_FILE)));
            manifest(&out, "extract-general", &inputs, json!({"model": b.model_id()}))?;
            print_json(&summary);
            Ok(())
        }
        Command::ExtractSpecific { in_dir, context, out, checkpoint, backend } => {
            let b = make_backend(&backend)?;
            let context = context.unwrap_or_else(|| in_dir.join(pipeline::CONTEXT_FILE));
            let summary =
                pipeline::run_extract_specific(&in_dir, &context, &out, checkpoint.as_deref(), &b)?;
            let mut inputs = graph_inputs(&in_dir);
            inputs.push(("context", context.clone()));
            manifest(&out, "extract-specific", &inputs, json!({"model": b.model_id()}))?;
            print_json(&summary);
            Ok(())
        }
        Command::Refine { staged, graph, out, max_subset, checkpoint, backend } => {
            let b = make_backend(&backend)?;
            let summary =
                pipeline::run_refine(&staged, &graph, &out, max_subset, checkpoint.as_deref(), &b)?;
            let mut inputs = graph_inputs(&graph);
            inputs.push(("candidates", staged.join(pipeline::CANDIDATES_FILE)));
            inputs.push(("staged_edges", staged.join(pipeline::STAGED_EDGES_FILE)));
            manifest(
                &out,
                "refine",
                &inputs,
                json!({"max_subset": max_subset, "model": b.model_id()}),
            )?;
            print_json(&summary);
            Ok(())
        }
        Command::Validate { graph } => {
            let summary = pipeline::run_validate(&graph)?;
            print_json(&summary);
            if summary.violations > 0 {
                return Err(PipelineError::Validation { violations: summary.violations }.into());
            }
            Ok(())
        }
        Command::Stats { graph, out } => {
            let stats = pipeline::run_stats(&graph)?;
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&stats).expect("serializes"))
                    .map_err(|e| CliError::Pipeline(e.into()))?;
            }
            print_json(&stats);
            Ok(())
        }
        Command::Eval { graph, k, ratio, seed, backfill } => {
            let report = pipeline::run_eval(&graph, ratio, seed, k, backfill)?;
            print_json(&report);
            Ok(())
        }
        Command::RunAll {
            metadata,
            reviews,
            out,
            metagraph,
            variant,
            stopwords,
            max_reviews_per_item,
            max_subset,
            k,
            ratio,
            seed,
            backfill,
            backend,
        } => {
            let standard = metagraph.load()?;
            let options = ingest_options(variant, &stopwords, max_reviews_per_item)?;
            let b = make_backend(&backend)?;
            let cfg = RunAllConfig {
                metadata: metadata.clone(),
                reviews: reviews.clone(),
                out_root: out.clone(),
                standard,
                ingest: options,
                max_subset,
                ratio,
                seed,
                k,
                backfill,
            };
            let summary = pipeline::run_all(&cfg, &b)?;
            manifest(
                &out,
                "run-all",
                &[("metadata", metadata), ("reviews", reviews)],
                json!({
                    "variant": format!("{variant:?}").to_lowercase(),
                    "max_subset": max_subset,
                    "k": k,
                    "ratio": ratio,
                    "seed": seed,
                    "backfill": backfill,
                    "model": b.model_id(),
                }),
            )?;
            print_json(&summary);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
