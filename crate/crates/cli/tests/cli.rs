//! End-to-end subcommand behavior through the binary: exit codes, file
//! artifacts, and stage chaining on a small corpus.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topikg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const METADATA: &str = r#"{"asin":"B001","title":"Ultra Hydrating Face Serum","brand":"Glow Labs","categories":[["Beauty","Skin Care","Serum"]],"description":"A vegan lightweight serum.","related":{"also_bought":["B002","B999"]}}
{"asin":"B002","title":"Collagen Plumping Serum","brand":"Glow Labs","categories":[["Beauty","Skin Care","Serum"]],"description":"Rich plumping collagen formula."}
{"asin":"B003","title":"Gentle Foaming Cleanser","brand":"Pure","categories":[["Beauty","Skin Care","Cleanser"]],"description":"Gentle foaming wash."}
{"asin":"B004","title":"Mega Hydrating Night Serum","categories":[["Beauty","Skin Care","Serum"]]}
"#;

const REVIEWS: &str = r#"{"reviewerID":"U1","asin":"B001","reviewText":"Leaves my skin hydrated, never greasy","overall":5}
{"reviewerID":"U1","asin":"B003","reviewText":"Gentle with a fresh scent","overall":4}
{"reviewerID":"U2","asin":"B002","reviewText":"My skin feels plump and hydrated","overall":5}
{"reviewerID":"U2","asin":"B001","reviewText":"Hydrating but sticky","overall":3}
{"reviewerID":"U3","asin":"B004","reviewText":"So hydrating and smooth","overall":5}
"#;

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("metadata.jsonl"), METADATA).unwrap();
        fs::write(root.join("reviews.jsonl"), REVIEWS).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let out = run(&["ingest", "--definitely-not-a-flag"]);
    assert_code(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage") || stderr.contains("usage"), "stderr: {stderr}");
}

#[test]
fn missing_input_file_exits_3() {
    let ws = Workspace::new();
    let out = run(&[
        "ingest",
        "--metadata",
        &ws.path("nope.jsonl"),
        "--reviews",
        &ws.path("reviews.jsonl"),
        "--out",
        &ws.path("out"),
    ]);
    assert_code(&out, 3);
}

#[test]
fn stage_chain_produces_artifacts_and_validates() {
    let ws = Workspace::new();
    let ingest = run(&[
        "ingest",
        "--metadata",
        &ws.path("metadata.jsonl"),
        "--reviews",
        &ws.path("reviews.jsonl"),
        "--out",
        &ws.path("g0"),
    ]);
    assert_code(&ingest, 0);
    for file in ["entities.tsv", "triplets.tsv", "metagraph.json", "items.jsonl", "context.jsonl", "type_tree.json", "manifest.json"] {
        assert!(ws.root.join("g0").join(file).is_file(), "missing {file}");
    }

    let general = run(&[
        "extract-general",
        "--in",
        &ws.path("g0"),
        "--out",
        &ws.path("g1"),
        "--checkpoint",
        &ws.path("general.ckpt"),
        "--backend",
        "mock",
    ]);
    assert_code(&general, 0);
    assert!(ws.root.join("g1").join("category_trees.json").is_file());
    let trees = fs::read_to_string(ws.root.join("g1").join("category_trees.json")).unwrap();
    assert!(trees.contains("Hydrating Serum"), "trees: {trees}");

    let specific = run(&[
        "extract-specific",
        "--in",
        &ws.path("g1"),
        "--out",
        &ws.path("staged"),
        "--backend",
        "mock",
    ]);
    assert_code(&specific, 0);
    assert!(ws.root.join("staged").join("candidates.tsv").is_file());
    assert!(ws.root.join("staged").join("staged_edges.tsv").is_file());

    let refine = run(&[
        "refine",
        "--staged",
        &ws.path("staged"),
        "--graph",
        &ws.path("g1"),
        "--out",
        &ws.path("final"),
        "--max-subset",
        "50",
        "--backend",
        "mock",
    ]);
    assert_code(&refine, 0);
    assert!(ws.root.join("final").join("partition.json").is_file());
    assert!(ws.root.join("final").join("canonical_map.tsv").is_file());

    let validate = run(&["validate", "--graph", &ws.path("final")]);
    assert_code(&validate, 0);

    let stats = run(&["stats", "--graph", &ws.path("final")]);
    assert_code(&stats, 0);
    let parsed: serde_json::Value =
        serde_json::from_slice(&stats.stdout).expect("stats is JSON");
    assert_eq!(parsed["user_count"], 3);
    assert_eq!(parsed["item_count"], 4);
    assert_eq!(parsed["entity_type_count"], 7);

    let eval = run(&[
        "eval",
        "--graph",
        &ws.path("final"),
        "--k",
        "10",
        "--ratio",
        "0.8",
        "--seed",
        "7",
    ]);
    assert_code(&eval, 0);
    let report: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert!(report["ndcg"].as_f64().unwrap() >= 0.0);
    assert!(report["users_evaluated"].as_u64().is_some());
}

#[test]
fn validate_reports_injected_edge_with_exit_5() {
    let ws = Workspace::new();
    let ingest = run(&[
        "ingest",
        "--metadata",
        &ws.path("metadata.jsonl"),
        "--reviews",
        &ws.path("reviews.jsonl"),
        "--out",
        &ws.path("g0"),
    ]);
    assert_code(&ingest, 0);
    // Tamper: point an item at another item with `purchase`.
    let triplets = ws.root.join("g0").join("triplets.tsv");
    let mut body = fs::read_to_string(&triplets).unwrap();
    body.push_str("0\tpurchase\t0\n");
    fs::write(&triplets, body).unwrap();
    let validate = run(&["validate", "--graph", &ws.path("g0")]);
    assert_code(&validate, 5);
    let summary: serde_json::Value = serde_json::from_slice(&validate.stdout).unwrap();
    assert_eq!(summary["violations"], 1);
}

#[test]
fn stats_on_fixture_matches_hand_counts() {
    let ws = Workspace::new();
    let ingest = run(&[
        "ingest",
        "--metadata",
        &ws.path("metadata.jsonl"),
        "--reviews",
        &ws.path("reviews.jsonl"),
        "--out",
        &ws.path("g0"),
    ]);
    assert_code(&ingest, 0);
    let stats = run(&["stats", "--graph", &ws.path("g0"), "--out", &ws.path("stats.json")]);
    assert_code(&stats, 0);
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.path("stats.json")).unwrap()).unwrap();
    // 3 users, 4 items, 2 brands, 4 type labels, 1 out-of-catalog related.
    assert_eq!(parsed["user_count"], 3);
    assert_eq!(parsed["item_count"], 4);
    assert_eq!(parsed["entity_count"], 3 + 4 + 2 + 4 + 1);
    // Base graph before topic stages: 5 entity types, 6 relation types.
    assert_eq!(parsed["entity_type_count"], 5);
    assert_eq!(parsed["relation_type_count"], 6);
    // 5 purchases; items head produced_by(3) + belongs_to(3 per path * 4 items
    // with some shared) + also_bought(2).
    assert_eq!(parsed["user_entity_relation_count"], 5);
    let item_rel = parsed["item_entity_relation_count"].as_u64().unwrap();
    // produced_by: 3 items with brands; belongs_to: 4 items x 3 path nodes,
    // minus shared-node duplicates kept per item = 12; also_*: 2.
    assert_eq!(item_rel, 3 + 12 + 2);
}

#[test]
fn run_all_writes_reports_and_manifest() {
    let ws = Workspace::new();
    let out = run(&[
        "run-all",
        "--metadata",
        &ws.path("metadata.jsonl"),
        "--reviews",
        &ws.path("reviews.jsonl"),
        "--out",
        &ws.path("out"),
        "--backend",
        "mock",
        "--seed",
        "7",
    ]);
    assert_code(&out, 0);
    for file in ["stats.json", "eval.json", "manifest.json"] {
        assert!(ws.root.join("out").join(file).is_file(), "missing {file}");
    }
    for dir in ["ingest", "general", "staged", "final", "checkpoints"] {
        assert!(ws.root.join("out").join(dir).is_dir(), "missing {dir}/");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.root.join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["tool"], "topikg");
    assert_eq!(manifest["subcommand"], "run-all");
    assert_eq!(manifest["inputs"]["metadata"].as_str().unwrap().len(), 64);
}

#[test]
fn backend_config_file_is_overridden_by_flags() {
    let ws = Workspace::new();
    fs::write(ws.path("cfg.json"), r#"{"backend": "http", "endpoint": "http://127.0.0.1:1/x"}"#)
        .unwrap();
    // The flag wins over the file, so the mock is used and no network is hit.
    let ingest = run(&[
        "ingest",
        "--metadata",
        &ws.path("metadata.jsonl"),
        "--reviews",
        &ws.path("reviews.jsonl"),
        "--out",
        &ws.path("g0"),
    ]);
    assert_code(&ingest, 0);
    let general = run(&[
        "extract-general",
        "--in",
        &ws.path("g0"),
        "--out",
        &ws.path("g1"),
        "--config",
        &ws.path("cfg.json"),
        "--backend",
        "mock",
    ]);
    assert_code(&general, 0);
}

#[test]
fn bad_config_file_exits_2() {
    let ws = Workspace::new();
    fs::write(ws.path("cfg.json"), r#"{"backend": "quantum"}"#).unwrap();
    let out = run(&[
        "extract-general",
        "--in",
        &ws.path("missing"),
        "--out",
        &ws.path("g1"),
        "--config",
        &ws.path("cfg.json"),
    ]);
    assert_code(&out, 2);
}

#[test]
fn run_all_accepts_a_swapped_in_metagraph() {
    let ws = Workspace::new();
    // Same as the bundled standard, so the run must succeed end to end.
    let config = topikg_core::metagraph::MetagraphConfig::from_metagraph(
        &topikg_core::metagraph::standard_metagraph(),
    );
    fs::write(ws.path("mg.json"), config.to_json_pretty()).unwrap();
    let out = run(&[
        "run-all",
        "--metadata",
        &ws.path("metadata.jsonl"),
        "--reviews",
        &ws.path("reviews.jsonl"),
        "--out",
        &ws.path("out"),
        "--metagraph",
        &ws.path("mg.json"),
        "--backend",
        "mock",
    ]);
    assert_code(&out, 0);
}

#[test]
fn cache_dir_is_populated_and_reused() {
    let ws = Workspace::new();
    let ingest = run(&[
        "ingest",
        "--metadata",
        &ws.path("metadata.jsonl"),
        "--reviews",
        &ws.path("reviews.jsonl"),
        "--out",
        &ws.path("g0"),
    ]);
    assert_code(&ingest, 0);
    let args = [
        "extract-specific",
        "--in",
        &ws.path("g0"),
        "--out",
        &ws.path("staged"),
        "--backend",
        "mock",
        "--cache-dir",
        &ws.path("cache"),
    ];
    assert_code(&run(&args), 0);
    let entries = fs::read_dir(ws.path("cache")).unwrap().count();
    assert!(entries > 0, "cache should be populated");
    // Second run hits the cache and still succeeds.
    assert_code(&run(&args), 0);
    assert_eq!(fs::read_dir(ws.path("cache")).unwrap().count(), entries);
}
