use std::path::Path;
use std::process::{Command, Output};

fn periomap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_periomap")).current_dir(dir).env("RUST_LOG", "warn").args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = r#"
output_dir = "out"
schemes = ["p2v", "citation"]

[input]
papers = "corpus/papers.tsv"
citations = "corpus/citations.tsv"
abstracts = "corpus/abstracts.jsonl"

[trails]
walks_per_source = 3

[p2v]
dimension = 8
epochs = 2

[kmeans]
k = 2
restarts = 2

[classifier]
folds = 4

[topics]
scan_enabled = false

[topics.lda]
topics = 2
iterations = 20
burn_in = 5

[export]
grid_nx = 5
grid_ny = 4
"#;

/// A two-community corpus under `corpus/` plus `small.toml` pointing at it.
fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = periomap(dir.path(), &["--out", "corpus", "synth", "--communities", "2", "--papers-per-community", "40"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("corpus/config.toml").exists());
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

#[test]
fn stage_commands_share_the_cache() {
    let dir = setup();
    let o = periomap(dir.path(), &["--config", "small.toml", "run", "--stage", "cluster"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("cluster    computed"), "{text}");
    assert!(!text.contains("classify"));
    assert!(dir.path().join("out/cluster/p2v.tsv").exists());
    assert!(!dir.path().join("out/classify").exists());

    let o = periomap(dir.path(), &["--config", "small.toml", "classify"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("cluster    cached") && text.contains("classify   computed"), "{text}");
    assert!(dir.path().join("out/classify/citation/report.json").exists());
}

#[test]
fn exports_list_their_files() {
    let dir = setup();
    let o = periomap(dir.path(), &["--config", "small.toml", "export", "sankey", "--pair", "citation:p2v"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("citation__p2v.filtered.tsv"), "{text}");
    assert!(!text.contains("p2v__citation"));

    let o = periomap(dir.path(), &["--config", "small.toml", "export", "map"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("p2v__citation.grid.tsv"));
    let grid = std::fs::read_to_string(dir.path().join("out/export/map/p2v__citation.grid.tsv")).unwrap();
    assert_eq!(grid.lines().count(), 20);
}

#[test]
fn overrides_reach_the_manifest() {
    let dir = setup();
    let o = periomap(dir.path(), &["--config", "small.toml", "--seed", "99", "--out", "elsewhere", "ingest"]);
    assert_eq!(o.status.code(), Some(0));
    let manifest = std::fs::read_to_string(dir.path().join("elsewhere/manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(v["config"]["seed"], 99);
}

#[test]
fn exit_codes() {
    let dir = setup();
    let o = periomap(dir.path(), &["--config", "missing.toml", "run"]);
    assert_eq!(o.status.code(), Some(2));
    let o = periomap(dir.path(), &["--config", "small.toml", "run", "--stage", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown stage"));

    // More clusters than periodicals fails inside the cluster stage.
    std::fs::write(dir.path().join("bad.toml"), SMALL.replace("k = 2", "k = 500")).unwrap();
    let o = periomap(dir.path(), &["--config", "bad.toml", "cluster"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cluster"));
}
