use std::path::{Path, PathBuf};

use periomap_core::pipeline::config::{ExportConfig, TopicsConfig};
use periomap_core::pipeline::{
    generate_synthetic_corpus, run_pipeline, run_pipeline_with, RunOptions, SchemeKind, SynthSpec,
};
use periomap_core::topics::{LdaConfig, ScanConfig};
use periomap_core::{Error, PipelineConfig};

fn small_corpus(dir: &Path) -> PipelineConfig {
    let spec = SynthSpec {
        papers_per_community: 60,
        periodicals_per_community: 3,
        references_per_paper: 5,
        words_per_abstract: 12,
        ..Default::default()
    };
    let files = generate_synthetic_corpus(&spec, &dir.join("corpus")).unwrap();
    let mut cfg = PipelineConfig { seed: 5, output_dir: dir.join("out"), ..Default::default() };
    cfg.input.papers = files.papers;
    cfg.input.citations = files.citations;
    cfg.input.abstracts = files.abstracts;
    cfg.input.scopus = Some(files.scopus);
    cfg.trails.walks_per_source = 3;
    cfg.p2v.dimension = 16;
    cfg.p2v.epochs = 2;
    cfg.node2vec.walk_length = 20;
    cfg.node2vec.walks_per_source = 5;
    cfg.node2vec_sgns.dimension = 16;
    cfg.kmeans.k = 4;
    cfg.kmeans.restarts = 3;
    cfg.monolabel.neighbors = 5;
    cfg.classifier.folds = 5;
    cfg.topics = TopicsConfig {
        lda: LdaConfig { topics: 4, iterations: 30, burn_in: 10, ..Default::default() },
        scan: ScanConfig { grid: vec![2, 4], sample_fraction: 0.5, ..Default::default() },
        ..Default::default()
    };
    cfg.export = ExportConfig { grid_nx: 8, grid_ny: 6, ..Default::default() };
    cfg
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_run_then_cached_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_corpus(dir.path());
    let first = run_pipeline(&cfg).unwrap();
    assert_eq!(first.stages.len(), 9);
    assert!(first.stages.iter().all(|s| !s.cached));

    let out = &cfg.output_dir;
    for f in [
        "manifest.json",
        "cluster/p2v.tsv",
        "cluster/scopus.json",
        "classify/citation/report.json",
        "classify/cocitation-n2v/scores.tsv",
        "topics/theta.tsv",
        "agreement/topic_label.json",
        "export/sankey/p2v__scopus.filtered.tsv",
        "export/map/p2v__citation.grid.tsv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let grid = std::fs::read_to_string(out.join("export/map/p2v__citation.grid.tsv")).unwrap();
    assert_eq!(grid.lines().count(), 48);

    let snapshot: Vec<(PathBuf, Vec<u8>)> =
        files_under(out).into_iter().map(|f| (f.clone(), std::fs::read(out.join(&f)).unwrap())).collect();
    let second = run_pipeline(&cfg).unwrap();
    assert!(second.stages.iter().all(|s| s.cached));
    let again: Vec<(PathBuf, Vec<u8>)> =
        files_under(out).into_iter().map(|f| (f.clone(), std::fs::read(out.join(&f)).unwrap())).collect();
    assert_eq!(snapshot, again);

    // A fresh directory reproduces every artifact byte for byte; the manifest
    // differs only in the recorded output directory.
    let other = PipelineConfig { output_dir: dir.path().join("out2"), ..cfg.clone() };
    run_pipeline(&other).unwrap();
    let fresh: Vec<(PathBuf, Vec<u8>)> = files_under(&other.output_dir)
        .into_iter()
        .map(|f| (f.clone(), std::fs::read(other.output_dir.join(&f)).unwrap()))
        .collect();
    assert_eq!(snapshot.len(), fresh.len());
    for ((fa, a), (fb, b)) in snapshot.iter().zip(&fresh) {
        assert_eq!(fa, fb);
        if fa == Path::new("manifest.json") {
            let (a, b) = (String::from_utf8_lossy(a), String::from_utf8_lossy(b));
            let out2 = other.output_dir.display().to_string();
            assert_eq!(a, b.replace(&out2, &out.display().to_string()));
        } else {
            assert!(a == b, "{} differs", fa.display());
        }
    }
}

#[test]
fn dropping_a_scheme_drops_only_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_corpus(dir.path());
    cfg.schemes = vec![SchemeKind::P2v, SchemeKind::Citation];
    cfg.topics.scan_enabled = false;
    run_pipeline(&cfg).unwrap();
    let out = &cfg.output_dir;
    assert!(out.join("cluster/citation.tsv").exists());
    assert!(out.join("classify/p2v/report.json").exists());
    for absent in [
        "cluster/scopus.tsv",
        "cluster/cocitation.tsv",
        "classify/scopus",
        "walks/citation-n2v.txt.gz",
        "matrices/cocitation.tsv",
    ] {
        assert!(!out.join(absent).exists(), "unexpected {absent}");
    }
    assert!(!out.join("topics/scan.json").exists());

    // Rerunning with one scheme fewer recomputes from the cluster stage on.
    cfg.schemes = vec![SchemeKind::P2v];
    let r = run_pipeline(&cfg).unwrap();
    assert!(!out.join("cluster/citation.tsv").exists());
    assert!(!out.join("classify/citation").exists());
    assert!(out.join("cluster/p2v.tsv").exists());
    assert!(r.stages[0].cached);
}

#[test]
fn stage_limit_and_resume_after_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_corpus(dir.path());
    cfg.schemes = vec![SchemeKind::P2v];
    let opts = RunOptions { until: Some("embed".into()), force: false };
    let r = run_pipeline_with(&cfg, &opts).unwrap();
    assert_eq!(r.stages.last().unwrap().name, "embed");
    assert!(!cfg.output_dir.join("cluster").exists());

    // 12 periodicals cannot form 50 clusters.
    cfg.kmeans.k = 50;
    let err = run_pipeline(&cfg).unwrap_err();
    match &err {
        Error::Stage { stage, .. } => assert_eq!(stage, "cluster"),
        other => panic!("unexpected error {other}"),
    }
    cfg.kmeans.k = 4;
    let r = run_pipeline(&cfg).unwrap();
    assert!(r.stages[..4].iter().all(|s| s.cached));
    assert!(!r.stages[4].cached);

    let bad = RunOptions { until: Some("nope".into()), force: false };
    assert!(run_pipeline_with(&cfg, &bad).unwrap_err().is_validation());
}

#[test]
fn missing_inputs_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_corpus(dir.path());
    cfg.input.papers = dir.path().join("nowhere.tsv");
    assert!(run_pipeline(&cfg).unwrap_err().is_validation());
    cfg.input.scopus = None;
    assert!(run_pipeline(&cfg).unwrap_err().is_validation());
}
