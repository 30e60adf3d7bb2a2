//! Stage-by-stage pipeline execution with content-addressed caching.
//!
//! Every stage writes its artifacts under `<output_dir>/<stage>/` and then
//! a `.key` file holding the SHA-256 of its configuration, its inputs and
//! the previous stage's key. A later run whose computed key matches the
//! stored one reuses the artifacts. Downstream stages always read their
//! inputs back from these files, so cached and fresh runs behave the same.

use std::collections::BTreeMap;
use std::io::Read as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::classify::{crossval_multiclass, hash_vectorize, one_vs_rest, write_score_dump, HashedVector};
use crate::cluster::{kmeans, scheme_sizes, DenseRows, SchemeLabeling, SparseRows};
use crate::data::{
    filter_decade, ingest_citations, ingest_papers, ingest_scopus, read_abstracts, scopus_monolabels, write_papers,
    CitationGraph, FilterReport, PaperIdx, PaperSet, PeriodicalId, PeriodicalRegistry,
};
use crate::embed::{train_sgns, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::io_util::{read_json, write_json, write_with};
use crate::matrices::{build_citation_matrix, build_cocitation_matrix, row_normalize, PeriodicalMatrix};
use crate::metrics::{agreement, element_centric_similarity};
use crate::topics::{coherence_scan, dominant_topic, fit_lda, write_theta, write_topic_report, LdaConfig, LdaCorpus};
use crate::walks::{generate_citation_trails, node2vec_walks, TrailCorpus};

use super::config::{PipelineConfig, SchemeKind};
use super::map::{export_similarity_map, pca_coordinates, read_coordinates, Coordinates};
use super::sankey::{export_sankey, shared_universe};

pub const STAGES: [&str; 9] =
    ["ingest", "matrices", "walks", "embed", "cluster", "classify", "topics", "agreement", "export"];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Stop after this stage.
    pub until: Option<String>,
    /// Ignore cached artifacts.
    pub force: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub cached: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub stages: Vec<StageRecord>,
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary> {
    run_pipeline_with(config, &RunOptions::default())
}

pub fn run_pipeline_with(config: &PipelineConfig, options: &RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let last = match &options.until {
        Some(name) => STAGES
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::Config(format!("unknown stage `{name}`; expected one of {}", STAGES.join(", "))))?,
        None => STAGES.len() - 1,
    };
    let mut run =
        Runner { cfg: config.resolved(), out: config.output_dir.clone(), force: options.force, records: Vec::new() };

    let ingested = run.stage("ingest", run.ingest_key()?, |r, dir| r.ingest(dir), |r, dir| r.load_ingest(dir))?;
    if last >= 1 {
        let matrices = run.stage(
            "matrices",
            run.key_of(&json!(run.matrices_needed())),
            |r, dir| r.matrices(dir, &ingested),
            load_matrices,
        )?;
        if last >= 2 {
            let walks_key =
                run.key_of(&json!({ "trails": run.cfg.trails, "node2vec": run.cfg.node2vec, "p2v": run.p2v_needed() }));
            let walks = run.stage("walks", walks_key, |r, dir| r.walks(dir, &ingested, &matrices), load_corpora)?;
            if last >= 3 {
                let embed_key = run.key_of(&json!({ "p2v": run.cfg.p2v, "node2vec": run.cfg.node2vec_sgns }));
                let embeddings = run.stage("embed", embed_key, |r, dir| r.embed(dir, &walks), load_embeddings)?;
                drop(walks);
                if last >= 4 {
                    let cluster_key = run.key_of(&json!({ "schemes": run.cfg.schemes, "kmeans": run.cfg.kmeans, "monolabel": run.cfg.monolabel }));
                    let schemes = run.stage(
                        "cluster",
                        cluster_key,
                        |r, dir| r.cluster(dir, &ingested, &matrices, &embeddings),
                        |r, dir| r.load_schemes(dir),
                    )?;
                    run.downstream(last, &ingested, &embeddings, &schemes)?;
                }
            }
        }
    }
    run.write_manifest()?;
    Ok(RunSummary { output_dir: run.out, stages: run.records })
}

struct Runner {
    cfg: PipelineConfig,
    out: PathBuf,
    force: bool,
    records: Vec<StageRecord>,
}

struct Ingested {
    registry: PeriodicalRegistry,
    papers: PaperSet,
    graph: CitationGraph,
    docs: Vec<(PaperIdx, String)>,
    universe: Vec<PeriodicalId>,
}

#[derive(Default)]
struct Matrices {
    citation: Option<PeriodicalMatrix>,
    cocitation: Option<PeriodicalMatrix>,
    citation_normalized: Option<PeriodicalMatrix>,
    cocitation_normalized: Option<PeriodicalMatrix>,
}

type Named<T> = BTreeMap<String, T>;

fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Files under `dir`, sorted, relative to `root`.
fn list_files(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            list_files(&p, root, out)?;
        } else if p.file_name().is_some_and(|n| n != ".key") {
            out.push(p.strip_prefix(root).unwrap_or(&p).to_path_buf());
        }
    }
    Ok(())
}

fn remove_dir(dir: &Path) -> Result<()> {
    match std::fs::remove_dir_all(dir) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(dir, e)),
        _ => Ok(()),
    }
}

impl Runner {
    fn key_of(&self, stage_config: &serde_json::Value) -> String {
        let mut h = Sha256::new();
        h.update(self.records.last().map_or("", |r| r.key.as_str()).as_bytes());
        h.update(b"\0");
        h.update(self.records.len().to_le_bytes());
        h.update(stage_config.to_string().as_bytes());
        hex::encode(h.finalize())
    }

    fn ingest_key(&self) -> Result<String> {
        let i = &self.cfg.input;
        let mut inputs = BTreeMap::new();
        for (name, path) in [
            ("papers", Some(&i.papers)),
            ("citations", Some(&i.citations)),
            ("abstracts", Some(&i.abstracts)),
            ("scopus", i.scopus.as_ref()),
        ] {
            if let Some(p) = path {
                inputs.insert(name, sha256_file(p)?);
            }
        }
        Ok(self.key_of(&json!({ "inputs": inputs, "min_year": self.cfg.min_year })))
    }

    /// Runs or reuses one stage. `compute` writes artifacts into the stage
    /// directory; `load` reads them back.
    fn stage<T>(
        &mut self,
        name: &str,
        key: String,
        compute: impl FnOnce(&Self, &Path) -> Result<()>,
        load: impl FnOnce(&Self, &Path) -> Result<T>,
    ) -> Result<T> {
        let wrap = |e: Error| Error::Stage { stage: name.to_string(), source: Box::new(e) };
        let dir = self.out.join(name);
        let stamp = dir.join(".key");
        let cached = !self.force && std::fs::read_to_string(&stamp).is_ok_and(|k| k.trim() == key);
        if cached {
            log::info!("stage {name}: cached");
        } else {
            log::info!("stage {name}: running");
            remove_dir(&dir).map_err(wrap)?;
            std::fs::create_dir_all(&dir).map_err(|e| wrap(Error::io(&dir, e)))?;
            compute(self, &dir).map_err(wrap)?;
            std::fs::write(&stamp, format!("{key}\n")).map_err(|e| wrap(Error::io(&stamp, e)))?;
        }
        let value = load(self, &dir).map_err(wrap)?;
        self.records.push(StageRecord { name: name.to_string(), key, cached });
        Ok(value)
    }

    // ---- ingest ----

    fn ingest(&self, dir: &Path) -> Result<()> {
        let input = &self.cfg.input;
        let (mut registry, papers, paper_summary) = ingest_papers(&input.papers)?;
        let (edges, citation_summary) = ingest_citations(&input.citations, &papers)?;
        let (graph, filter) = filter_decade(&papers.papers, registry.len(), &edges, self.cfg.min_year);
        let scopus = match &input.scopus {
            Some(p) => Some(ingest_scopus(p, &mut registry)?),
            None => None,
        };
        let (docs, skipped) = read_abstracts(&input.abstracts, &papers)?;

        write_papers(&dir.join("papers.tsv"), &papers, &registry)?;
        write_with(&dir.join("citations.tsv"), |w| {
            for e in graph.edges() {
                writeln!(
                    w,
                    "{}\t{}",
                    papers.papers[e.citing as usize].paper_id, papers.papers[e.cited as usize].paper_id
                )?;
            }
            Ok(())
        })?;
        write_with(&dir.join("scopus.tsv"), |w| {
            for (id, name) in registry.iter() {
                if let Some(areas) = registry.asjc(id) {
                    let codes: Vec<String> = areas.iter().map(|a| a.code().to_string()).collect();
                    writeln!(w, "{name}\t{}", codes.join(","))?;
                }
            }
            Ok(())
        })?;
        write_with(&dir.join("abstracts.jsonl"), |w| {
            for (id, text) in docs.iter().filter(|(id, _)| graph.is_retained(*id)) {
                writeln!(w, "{}", json!({ "paper_id": papers.papers[*id as usize].paper_id, "text": text }))?;
            }
            Ok(())
        })?;
        let universe = graph.active_periodicals();
        log::info!("periodical universe: {} of {} periodicals have a qualifying edge", universe.len(), registry.len());
        write_with(&dir.join("periodicals.tsv"), |w| {
            for (id, name) in registry.iter() {
                writeln!(w, "{id}\t{name}\t{}", u8::from(universe.binary_search(&id).is_ok()))?;
            }
            Ok(())
        })?;
        write_json(
            &dir.join("summary.json"),
            &json!({
                "papers": paper_summary,
                "citations": citation_summary,
                "filter": filter,
                "scopus": scopus,
                "abstracts": docs.len(),
                "abstracts_unknown_paper": skipped,
                "universe": universe.len(),
            }),
        )
    }

    fn load_ingest(&self, dir: &Path) -> Result<Ingested> {
        let (mut registry, papers, _) = ingest_papers(&dir.join("papers.tsv"))?;
        let (edges, _) = ingest_citations(&dir.join("citations.tsv"), &papers)?;
        let (graph, _): (CitationGraph, FilterReport) =
            filter_decade(&papers.papers, registry.len(), &edges, self.cfg.min_year);
        ingest_scopus(&dir.join("scopus.tsv"), &mut registry)?;
        let (docs, _) = read_abstracts(&dir.join("abstracts.jsonl"), &papers)?;
        let universe = graph.active_periodicals();
        if universe.is_empty() {
            return Err(Error::InvalidInput("no citation survives the decade filter".into()));
        }
        Ok(Ingested { registry, papers, graph, docs, universe })
    }

    // ---- matrices ----

    fn matrices_needed(&self) -> (bool, bool) {
        let c = &self.cfg;
        (
            c.wants(SchemeKind::Citation) || c.wants(SchemeKind::CitationN2v),
            c.wants(SchemeKind::Cocitation) || c.wants(SchemeKind::CocitationN2v),
        )
    }

    fn matrices(&self, dir: &Path, ing: &Ingested) -> Result<()> {
        let (citation, cocitation) = self.matrices_needed();
        if citation {
            let m = build_citation_matrix(&ing.graph);
            m.write(&dir.join("citation.tsv"))?;
            row_normalize(&m).write(&dir.join("citation-normalized.tsv"))?;
        }
        if cocitation {
            let m = build_cocitation_matrix(&ing.graph);
            m.write(&dir.join("cocitation.tsv"))?;
            row_normalize(&m).write(&dir.join("cocitation-normalized.tsv"))?;
        }
        Ok(())
    }

    // ---- walks / embeddings ----

    fn p2v_needed(&self) -> bool {
        let c = &self.cfg;
        c.wants(SchemeKind::P2v)
            || c.wants(SchemeKind::Scopus)
            || (c.export.maps && c.input.coordinates.is_none() && !c.export_pairs().is_empty())
    }

    fn walks(&self, dir: &Path, ing: &Ingested, m: &Matrices) -> Result<()> {
        if self.p2v_needed() {
            generate_citation_trails(&ing.graph, &self.cfg.trails)?.write(&dir.join("p2v.txt.gz"))?;
        }
        if self.cfg.wants(SchemeKind::CitationN2v) {
            node2vec_walks(m.citation.as_ref().unwrap(), &self.cfg.node2vec)?
                .write(&dir.join("citation-n2v.txt.gz"))?;
        }
        if self.cfg.wants(SchemeKind::CocitationN2v) {
            node2vec_walks(m.cocitation.as_ref().unwrap(), &self.cfg.node2vec)?
                .write(&dir.join("cocitation-n2v.txt.gz"))?;
        }
        Ok(())
    }

    fn embed(&self, dir: &Path, walks: &Named<TrailCorpus>) -> Result<()> {
        for (name, corpus) in walks {
            let cfg = if name == "p2v" { &self.cfg.p2v } else { &self.cfg.node2vec_sgns };
            let (mut emb, report) = train_sgns(corpus, cfg)?;
            emb.drop_context();
            emb.write(&dir.join(format!("{name}.vec")))?;
            write_json(&dir.join(format!("{name}.train.json")), &report)?;
        }
        Ok(())
    }

    // ---- schemes ----

    fn cluster(&self, dir: &Path, ing: &Ingested, m: &Matrices, emb: &Named<EmbeddingMatrix>) -> Result<()> {
        let mut sizes = BTreeMap::new();
        for &scheme in &self.cfg.schemes {
            let (labeling, meta) = self.build_scheme(scheme, ing, m, emb)?;
            labeling.write(&dir.join(format!("{scheme}.tsv")), meta)?;
            sizes.insert(scheme.name(), scheme_sizes(&labeling)?);
        }
        write_json(&dir.join("sizes.json"), &sizes)
    }

    fn build_scheme(
        &self,
        scheme: SchemeKind,
        ing: &Ingested,
        m: &Matrices,
        emb: &Named<EmbeddingMatrix>,
    ) -> Result<(SchemeLabeling, serde_json::Value)> {
        let universe = &ing.universe;
        let cfg = &self.cfg.kmeans;
        let from_embedding = |name: &str| -> Result<(SchemeLabeling, serde_json::Value)> {
            let e = &emb[name];
            let rows: Vec<Vec<f64>> = universe
                .iter()
                .map(|&p| e.vector(p).map(<[f64]>::to_vec).ok_or(Error::UnknownToken(p)))
                .collect::<Result<_>>()?;
            let result = kmeans(&DenseRows::new(&rows)?, cfg)?;
            let meta =
                json!({ "kmeans": cfg, "inertia": result.inertia, "iterations": result.iterations, "vectors": name });
            Ok((SchemeLabeling::from_kmeans(scheme.name(), universe, &result), meta))
        };
        let from_matrix = |matrix: &PeriodicalMatrix| -> Result<(SchemeLabeling, serde_json::Value)> {
            let result = kmeans(&SparseRows::from_matrix(matrix, universe), cfg)?;
            let meta = json!({ "kmeans": cfg, "inertia": result.inertia, "iterations": result.iterations, "vectors": "row-normalized" });
            Ok((SchemeLabeling::from_kmeans(scheme.name(), universe, &result), meta))
        };
        match scheme {
            SchemeKind::P2v | SchemeKind::CitationN2v | SchemeKind::CocitationN2v => from_embedding(scheme.name()),
            SchemeKind::Citation => from_matrix(m.citation_normalized.as_ref().unwrap()),
            SchemeKind::Cocitation => from_matrix(m.cocitation_normalized.as_ref().unwrap()),
            SchemeKind::Scopus => {
                let (labels, unlabelable) = scopus_monolabels(&emb["p2v"], &ing.registry, &self.cfg.monolabel)?;
                let pairs: Vec<(PeriodicalId, _)> =
                    labels.into_iter().filter(|(p, _)| universe.binary_search(p).is_ok()).collect();
                if pairs.is_empty() {
                    return Err(Error::InvalidInput("no periodical in the universe could be mono-labeled".into()));
                }
                let meta =
                    json!({ "monolabel": self.cfg.monolabel, "unlabelable": unlabelable, "labeled": pairs.len() });
                Ok((SchemeLabeling::from_pairs(scheme.name(), pairs), meta))
            }
        }
    }

    fn load_schemes(&self, dir: &Path) -> Result<Named<SchemeLabeling>> {
        self.cfg
            .schemes
            .iter()
            .map(|s| Ok((s.name().to_string(), SchemeLabeling::read(&dir.join(format!("{s}.tsv")))?)))
            .collect()
    }

    // ---- evaluation ----

    fn downstream(
        &mut self,
        last: usize,
        ing: &Ingested,
        emb: &Named<EmbeddingMatrix>,
        schemes: &Named<SchemeLabeling>,
    ) -> Result<()> {
        if last < 5 {
            return Ok(());
        }
        let key = self.key_of(&json!(self.cfg.classifier));
        self.stage("classify", key, |r, dir| r.classify(dir, ing, schemes), |_, _| Ok(()))?;
        if last < 6 {
            return Ok(());
        }
        let key = self.key_of(&json!(self.cfg.topics));
        let topics = self.stage("topics", key, |r, dir| r.topics(dir, ing), |_, dir| load_dominant(dir))?;
        if last < 7 {
            return Ok(());
        }
        let key = self.key_of(&json!({ "alpha": self.cfg.export.similarity_alpha }));
        self.stage("agreement", key, |r, dir| r.agreement(dir, ing, schemes, &topics), |_, _| Ok(()))?;
        if last < 8 {
            return Ok(());
        }
        let coords = match &self.cfg.input.coordinates {
            Some(p) => Some(sha256_file(p)?),
            None => None,
        };
        let key =
            self.key_of(&json!({ "export": self.cfg.export, "pairs": self.cfg.export_pairs(), "coordinates": coords }));
        self.stage("export", key, |r, dir| r.export(dir, ing, emb, schemes), |_, _| Ok(()))
    }

    /// Hashed documents whose periodical carries a label, with labels
    /// renumbered densely over the classes that have documents.
    fn labeled_documents<'a>(
        &self,
        ing: &'a Ingested,
        vectors: &'a [HashedVector],
        labeling: &SchemeLabeling,
    ) -> (Vec<HashedVector>, Vec<usize>, Vec<String>, Vec<u32>) {
        let mut raw = Vec::new();
        for (i, (paper, _)) in ing.docs.iter().enumerate() {
            if let Some(l) = labeling.label_of(ing.graph.periodical_of(*paper)) {
                raw.push((i, l));
            }
        }
        let mut present: Vec<u32> = raw.iter().map(|r| r.1).collect();
        present.sort_unstable();
        present.dedup();
        let x = raw.iter().map(|&(i, _)| vectors[i].clone()).collect();
        let y = raw.iter().map(|&(_, l)| present.binary_search(&l).unwrap()).collect();
        let ids = raw.iter().map(|&(i, _)| ing.papers.papers[ing.docs[i].0 as usize].paper_id.clone()).collect();
        (x, y, ids, present)
    }

    fn classify(&self, dir: &Path, ing: &Ingested, schemes: &Named<SchemeLabeling>) -> Result<()> {
        let cfg = &self.cfg.classifier;
        let vectors: Vec<HashedVector> =
            ing.docs.par_iter().map(|(_, text)| hash_vectorize(text, cfg.hash_dim)).collect::<Result<_>>()?;
        let mut summary = BTreeMap::new();
        for (name, labeling) in schemes {
            let (x, y, ids, present) = self.labeled_documents(ing, &vectors, labeling);
            let without_docs: Vec<u32> =
                (0..labeling.n_labels() as u32).filter(|l| present.binary_search(l).is_err()).collect();
            if !without_docs.is_empty() {
                log::warn!("scheme {name}: labels {without_docs:?} have no documents");
            }
            let report = crossval_multiclass(&x, &y, present.len(), cfg)?;
            let ovr = one_vs_rest(&x, &y, present.len(), cfg)?;
            let sub = dir.join(name);
            write_json(
                &sub.join("report.json"),
                &json!({ "documents": x.len(), "class_labels": present, "labels_without_documents": without_docs, "crossval": report }),
            )?;
            write_json(&sub.join("ovr.json"), &ovr)?;
            write_score_dump(&sub.join("scores.tsv"), &ids, &y, &report.scores)?;
            let per_sample: Vec<Vec<f64>> =
                (0..y.len()).map(|i| ovr.classes.iter().map(|c| c.scores[i]).collect()).collect();
            write_score_dump(&sub.join("ovr_scores.tsv"), &ids, &y, &per_sample)?;
            summary.insert(
                name.clone(),
                json!({
                    "macro_precision": report.aggregate.macro_precision,
                    "macro_recall": report.aggregate.macro_recall,
                    "macro_f1": report.aggregate.macro_f1,
                    "ranking_average_precision": report.aggregate.ranking_average_precision,
                    "ranking_loss": report.aggregate.ranking_loss,
                    "macro_average_precision": ovr.macro_average_precision,
                    "macro_auc": ovr.macro_auc,
                }),
            );
        }
        write_json(&dir.join("summary.json"), &summary)
    }

    fn topics(&self, dir: &Path, ing: &Ingested) -> Result<()> {
        let t = &self.cfg.topics;
        let corpus = LdaCorpus::from_texts(
            ing.docs.iter().map(|(p, text)| (ing.papers.papers[*p as usize].paper_id.clone(), text.as_str())),
        );
        let mut lda: LdaConfig = t.lda.clone();
        if t.scan_enabled {
            let scan = coherence_scan(&corpus, &t.scan, &lda)?;
            lda.topics = scan.selected;
            lda.alpha = None;
            write_json(&dir.join("scan.json"), &scan)?;
        }
        let fit_corpus = if t.final_fit_on_sample { corpus.sample(t.scan.sample_fraction, lda.seed)? } else { corpus };
        let model = fit_lda(&fit_corpus, &lda)?;
        write_theta(&dir.join("theta.tsv"), &fit_corpus, &model)?;
        write_topic_report(&dir.join("topics.tsv"), &fit_corpus, &model, t.scan.top_words)?;
        let dominant = dominant_topic(&model.theta);
        write_with(&dir.join("dominant.tsv"), |w| {
            for (id, k) in fit_corpus.doc_ids.iter().zip(&dominant) {
                writeln!(w, "{id}\t{k}")?;
            }
            Ok(())
        })?;
        write_json(
            &dir.join("summary.json"),
            &json!({
                "topics": lda.topics,
                "alpha": lda.alpha(),
                "beta": lda.beta,
                "documents": fit_corpus.len(),
                "dropped_empty": fit_corpus.dropped_empty,
                "initial_log_likelihood": model.initial_log_likelihood,
                "final_log_likelihood": model.final_log_likelihood,
            }),
        )
    }

    fn agreement(
        &self,
        dir: &Path,
        ing: &Ingested,
        schemes: &Named<SchemeLabeling>,
        topics: &[(String, usize)],
    ) -> Result<()> {
        let mut topic_label = BTreeMap::new();
        for (name, labeling) in schemes {
            let (mut t, mut l) = (Vec::new(), Vec::new());
            for (paper, topic) in topics {
                let Some(idx) = ing.papers.dense_id(paper) else { continue };
                if let Some(label) = labeling.label_of(ing.graph.periodical_of(idx)) {
                    t.push(*topic);
                    l.push(label);
                }
            }
            let report = if t.len() >= 2 { Some(agreement(&t, &l)?) } else { None };
            topic_label.insert(name.clone(), report);
        }
        write_json(&dir.join("topic_label.json"), &topic_label)?;

        let names: Vec<&String> = schemes.keys().collect();
        let mut pairs = Vec::new();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                let (a, b) = (&schemes[names[i]], &schemes[names[j]]);
                let universe = shared_universe(a, b);
                if universe.len() < 2 {
                    continue;
                }
                let la: Vec<u32> = universe.iter().map(|&p| a.label_of(p).unwrap()).collect();
                let lb: Vec<u32> = universe.iter().map(|&p| b.label_of(p).unwrap()).collect();
                let field = element_centric_similarity(&la, &lb, self.cfg.export.similarity_alpha)?;
                pairs.push(json!({
                    "a": names[i],
                    "b": names[j],
                    "agreement": agreement(&la, &lb)?,
                    "mean_element_similarity": field.mean(),
                }));
            }
        }
        write_json(&dir.join("schemes.json"), &pairs)
    }

    fn export(
        &self,
        dir: &Path,
        ing: &Ingested,
        emb: &Named<EmbeddingMatrix>,
        schemes: &Named<SchemeLabeling>,
    ) -> Result<()> {
        let e = &self.cfg.export;
        let pairs = self.cfg.export_pairs();
        let mut summary = BTreeMap::new();
        for &(a, b) in &pairs {
            let (la, lb) = (&schemes[a.name()], &schemes[b.name()]);
            let (all, filtered) = export_sankey(la, lb)?;
            let stem = format!("{a}__{b}");
            all.write(&dir.join("sankey").join(format!("{stem}.tsv")))?;
            filtered.write(&dir.join("sankey").join(format!("{stem}.filtered.tsv")))?;
            summary.insert(
                stem,
                json!({ "flows": all.flows.len(), "kept": filtered.flows.len(), "source_totals": all.source_totals }),
            );
        }
        let mut maps = BTreeMap::new();
        let mut coordinate_source = serde_json::Value::Null;
        if e.maps && !pairs.is_empty() {
            let coords: Coordinates = match &self.cfg.input.coordinates {
                Some(path) => {
                    let (c, unknown) = read_coordinates(path, &ing.registry)?;
                    coordinate_source = json!({ "file": path, "unknown_names": unknown });
                    c
                }
                None => {
                    coordinate_source = json!("pca:p2v");
                    pca_coordinates(&emb["p2v"], &ing.universe)?
                }
            };
            write_with(&dir.join("coordinates.tsv"), |w| {
                for (p, (x, y)) in &coords {
                    writeln!(w, "{p}\t{x}\t{y}")?;
                }
                Ok(())
            })?;
            for &(a, b) in &pairs {
                let (la, lb) = (&schemes[a.name()], &schemes[b.name()]);
                let universe = shared_universe(la, lb);
                let xa: Vec<u32> = universe.iter().map(|&p| la.label_of(p).unwrap()).collect();
                let xb: Vec<u32> = universe.iter().map(|&p| lb.label_of(p).unwrap()).collect();
                let field = element_centric_similarity(&xa, &xb, e.similarity_alpha)?;
                let values: Vec<(PeriodicalId, f64)> = universe.iter().copied().zip(field.values).collect();
                let stem = format!("{a}__{b}");
                let map = export_similarity_map(
                    &values,
                    &coords,
                    &ing.registry,
                    (e.grid_nx, e.grid_ny),
                    e.idw_power,
                    &dir.join("map").join(format!("{stem}.tsv")),
                    &dir.join("map").join(format!("{stem}.grid.tsv")),
                )?;
                maps.insert(stem, map);
            }
        }
        write_json(
            &dir.join("summary.json"),
            &json!({ "sankey": summary, "maps": maps, "coordinates": coordinate_source }),
        )
    }

    fn write_manifest(&self) -> Result<()> {
        let mut stages = Vec::new();
        for r in &self.records {
            let mut files = Vec::new();
            list_files(&self.out.join(&r.name), &self.out, &mut files)?;
            let outputs: Vec<serde_json::Value> = files
                .iter()
                .map(|f| Ok(json!({ "path": f.to_string_lossy().replace('\\', "/"), "sha256": sha256_file(&self.out.join(f))? })))
                .collect::<Result<_>>()?;
            stages.push(json!({ "name": r.name, "key": r.key, "outputs": outputs }));
        }
        let c = &self.cfg;
        write_json(
            &self.out.join("manifest.json"),
            &json!({
                "tool": concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")),
                "config": c,
                "conventions": {
                    "decade": "floor(year / 10) * 10; edges kept only within one decade",
                    "periodical_universe": "periodicals with at least one retained citation edge",
                    "cocitation": "binary per citing paper, zero diagonal",
                    "matrix_scheme_vectors": "row-normalized matrix rows",
                    "node2vec_weights": "unnormalized matrices",
                    "sgns_mode": if c.p2v.workers == 1 && c.node2vec_sgns.workers == 1 { "deterministic" } else { "asynchronous" },
                    "kmeans_init": "k-means++, best of restarts by inertia",
                    "kmeans_normalize": c.kmeans.normalize,
                    "monolabel_tie_break": "smallest ASJC code",
                    "hash": "FNV-1a 64-bit mod m, lowercase alphanumeric tokens",
                    "cnb_smoothing_dimension": "observed hashed features",
                    "folds": "stratified",
                    "fold_std": "population",
                    "one_vs_rest_curves": "pooled out-of-fold scores",
                    "lda_alpha": "50 / T unless set",
                    "coherence": c.topics.scan.measure,
                    "coordinates": if c.input.coordinates.is_some() { "file" } else { "pca:p2v" },
                },
                "stages": stages,
            }),
        )
    }
}

fn load_matrices(_: &Runner, dir: &Path) -> Result<Matrices> {
    let read = |name: &str| -> Result<Option<PeriodicalMatrix>> {
        let p = dir.join(name);
        if p.exists() {
            PeriodicalMatrix::read(&p).map(Some)
        } else {
            Ok(None)
        }
    };
    Ok(Matrices {
        citation: read("citation.tsv")?,
        cocitation: read("cocitation.tsv")?,
        citation_normalized: read("citation-normalized.tsv")?,
        cocitation_normalized: read("cocitation-normalized.tsv")?,
    })
}

fn load_corpora(_: &Runner, dir: &Path) -> Result<Named<TrailCorpus>> {
    let mut out = BTreeMap::new();
    for name in ["p2v", "citation-n2v", "cocitation-n2v"] {
        let p = dir.join(format!("{name}.txt.gz"));
        if p.exists() {
            out.insert(name.to_string(), TrailCorpus::read(&p)?);
        }
    }
    Ok(out)
}

fn load_embeddings(_: &Runner, dir: &Path) -> Result<Named<EmbeddingMatrix>> {
    let mut out = BTreeMap::new();
    for name in ["p2v", "citation-n2v", "cocitation-n2v"] {
        let p = dir.join(format!("{name}.vec"));
        if p.exists() {
            out.insert(name.to_string(), EmbeddingMatrix::read(&p)?);
        }
    }
    Ok(out)
}

fn load_dominant(dir: &Path) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::new();
    crate::io_util::for_each_line(&dir.join("dominant.tsv"), |line_no, line| {
        let parsed = line.split_once('\t').and_then(|(id, k)| Some((id.to_string(), k.parse().ok()?)));
        out.push(parsed.ok_or_else(|| Error::parse(dir.join("dominant.tsv"), line_no, "expected `doc \\t topic`"))?);
        Ok(())
    })?;
    Ok(out)
}

/// Reads a JSON artifact written by a stage, e.g. `classify/summary.json`.
pub fn read_artifact(output_dir: &Path, relative: &str) -> Result<serde_json::Value> {
    read_json(&output_dir.join(relative))
}
