//! Paper, citation and venue ingestion plus the decade-filtered citation graph.
//!
//! Input files are plain UTF-8 without headers:
//!
//! * `papers.tsv`: `paper_id \t periodical_name \t year`
//! * `citations.tsv`: `citing_paper_id \t cited_paper_id`
//! * `scopus.tsv`: `periodical_name \t asjc_code[,asjc_code...]`
//! * `abstracts.jsonl`: `{"paper_id": ..., "text": ...}` per line
//!
//! Periodical names are matched after canonicalization (lowercase, with
//! punctuation and whitespace runs collapsed to a single space).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::io_util::{for_each_line, write_with};

pub type PaperIdx = u32;
pub type PeriodicalId = u32;

pub const MIN_YEAR: i32 = 1800;
pub const DEFAULT_MIN_YEAR: i32 = 2010;
pub const DEFAULT_MONOLABEL_NEIGHBORS: usize = 50;

/// One of the Scopus ASJC subject areas, stored as its major code
/// (`1000` multidisciplinary, `1100`..`3600`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AsjcArea(u16);

impl AsjcArea {
    pub const MULTIDISCIPLINARY: AsjcArea = AsjcArea(1000);

    /// Accepts either a major area code (`2700`) or a four-digit subject
    /// code (`2705`), which is folded onto its major area.
    pub fn from_code(code: u16) -> Option<Self> {
        if (1000..3700).contains(&code) {
            Some(AsjcArea(code / 100 * 100))
        } else {
            None
        }
    }

    pub fn code(self) -> u16 {
        self.0
    }
}

impl fmt::Display for AsjcArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub dense_id: PaperIdx,
    pub periodical_id: PeriodicalId,
    pub year: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CitationEdge {
    pub citing: PaperIdx,
    pub cited: PaperIdx,
}

/// Lowercases and collapses every run of non-alphanumeric characters to a
/// single space.
pub fn canonicalize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut pending_space = false;
    for ch in name.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PeriodicalRegistry {
    names: Vec<String>,
    index: HashMap<String, PeriodicalId>,
    asjc: Vec<Option<BTreeSet<AsjcArea>>>,
}

impl PeriodicalRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, registering it in first-seen order.
    pub fn intern(&mut self, name: &str) -> PeriodicalId {
        let key = canonicalize_name(name);
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.names.len() as PeriodicalId;
        self.names.push(name.trim().to_string());
        self.index.insert(key, id);
        self.asjc.push(None);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<PeriodicalId> {
        self.index.get(&canonicalize_name(name)).copied()
    }

    pub fn name(&self, id: PeriodicalId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn asjc(&self, id: PeriodicalId) -> Option<&BTreeSet<AsjcArea>> {
        self.asjc.get(id as usize).and_then(Option::as_ref)
    }

    /// Attaches Scopus areas to a periodical. Empty sets are ignored so
    /// that a present label set is always non-empty.
    pub fn set_asjc(&mut self, id: PeriodicalId, areas: BTreeSet<AsjcArea>) {
        if areas.is_empty() {
            return;
        }
        if let Some(slot) = self.asjc.get_mut(id as usize) {
            slot.get_or_insert_with(BTreeSet::new).extend(areas);
        }
    }

    pub fn labeled_count(&self) -> usize {
        self.asjc.iter().filter(|a| a.is_some()).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PeriodicalId, &str)> {
        self.names.iter().enumerate().map(|(i, n)| (i as PeriodicalId, n.as_str()))
    }
}

/// Papers keyed by their dense id, with a reverse index from the opaque key.
#[derive(Clone, Debug, Default)]
pub struct PaperSet {
    pub papers: Vec<PaperRecord>,
    by_key: HashMap<String, PaperIdx>,
}

impl PaperSet {
    pub fn dense_id(&self, key: &str) -> Option<PaperIdx> {
        self.by_key.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub papers: usize,
    pub periodicals: usize,
    pub duplicates: usize,
}

pub fn ingest_papers(path: &Path) -> Result<(PeriodicalRegistry, PaperSet, IngestSummary)> {
    let mut registry = PeriodicalRegistry::new();
    let mut set = PaperSet::default();
    let mut summary = IngestSummary::default();
    for_each_line(path, |line_no, line| {
        if line.trim().is_empty() {
            return Ok(());
        }
        summary.rows += 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let key = fields[0].trim();
        let venue = fields[1].trim();
        if key.is_empty() {
            return Err(Error::parse(path, line_no, "empty paper id"));
        }
        if canonicalize_name(venue).is_empty() {
            return Err(Error::parse(path, line_no, "paper without a periodical"));
        }
        let year: i32 =
            fields[2].trim().parse().map_err(|_| Error::parse(path, line_no, format!("bad year `{}`", fields[2])))?;
        if year < MIN_YEAR {
            return Err(Error::parse(path, line_no, format!("year {year} before {MIN_YEAR}")));
        }
        if set.by_key.contains_key(key) {
            summary.duplicates += 1;
            return Ok(());
        }
        let dense_id = set.papers.len() as PaperIdx;
        let periodical_id = registry.intern(venue);
        set.by_key.insert(key.to_string(), dense_id);
        set.papers.push(PaperRecord { paper_id: key.to_string(), dense_id, periodical_id, year });
        Ok(())
    })?;
    summary.papers = set.papers.len();
    summary.periodicals = registry.len();
    if summary.duplicates > 0 {
        log::warn!("{}: rejected {} duplicate paper ids", path.display(), summary.duplicates);
    }
    Ok((registry, set, summary))
}

/// Writes papers in dense-id order so that re-ingesting reproduces the same
/// paper and periodical ids.
pub fn write_papers(path: &Path, papers: &PaperSet, registry: &PeriodicalRegistry) -> Result<()> {
    write_with(path, |w| {
        for p in &papers.papers {
            let name = registry.name(p.periodical_id).unwrap_or_default();
            writeln!(w, "{}\t{}\t{}", p.paper_id, name, p.year)?;
        }
        Ok(())
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationSummary {
    pub rows: usize,
    pub edges: usize,
    pub unknown_endpoint: usize,
    pub self_citations: usize,
    pub duplicates: usize,
}

pub fn ingest_citations(path: &Path, papers: &PaperSet) -> Result<(Vec<CitationEdge>, CitationSummary)> {
    let mut edges = Vec::new();
    let mut summary = CitationSummary::default();
    for_each_line(path, |line_no, line| {
        if line.trim().is_empty() {
            return Ok(());
        }
        summary.rows += 1;
        let mut fields = line.split('\t');
        let (Some(citing), Some(cited), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(path, line_no, "expected 2 tab-separated fields"));
        };
        match (papers.dense_id(citing.trim()), papers.dense_id(cited.trim())) {
            (Some(a), Some(b)) if a == b => summary.self_citations += 1,
            (Some(a), Some(b)) => edges.push(CitationEdge { citing: a, cited: b }),
            _ => summary.unknown_endpoint += 1,
        }
        Ok(())
    })?;
    edges.sort_unstable();
    let before = edges.len();
    edges.dedup();
    summary.duplicates = before - edges.len();
    summary.edges = edges.len();
    Ok((edges, summary))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopusSummary {
    pub rows: usize,
    pub matched: usize,
    pub unmatched: usize,
}

/// Attaches ASJC areas from `scopus.tsv` to periodicals already in the
/// registry. Rows naming unknown periodicals are counted, not added.
pub fn ingest_scopus(path: &Path, registry: &mut PeriodicalRegistry) -> Result<ScopusSummary> {
    let mut summary = ScopusSummary::default();
    for_each_line(path, |line_no, line| {
        if line.trim().is_empty() {
            return Ok(());
        }
        summary.rows += 1;
        let Some((name, codes)) = line.split_once('\t') else {
            return Err(Error::parse(path, line_no, "expected `name \\t codes`"));
        };
        let mut areas = BTreeSet::new();
        for code in codes.split(',').map(str::trim).filter(|c| !c.is_empty()) {
            let area = code
                .parse::<u16>()
                .ok()
                .and_then(AsjcArea::from_code)
                .ok_or_else(|| Error::parse(path, line_no, format!("bad ASJC code `{code}`")))?;
            areas.insert(area);
        }
        if areas.is_empty() {
            return Err(Error::parse(path, line_no, "no ASJC codes"));
        }
        match registry.lookup(name) {
            Some(id) => {
                registry.set_asjc(id, areas);
                summary.matched += 1;
            }
            None => summary.unmatched += 1,
        }
        Ok(())
    })?;
    Ok(summary)
}

#[derive(Deserialize)]
struct AbstractRow {
    paper_id: String,
    text: String,
}

/// Reads `abstracts.jsonl`, keeping rows whose paper is known. Returns the
/// documents sorted by paper id and the number of rows skipped.
pub fn read_abstracts(path: &Path, papers: &PaperSet) -> Result<(Vec<(PaperIdx, String)>, usize)> {
    let mut docs = Vec::new();
    let mut skipped = 0;
    for_each_line(path, |line_no, line| {
        if line.trim().is_empty() {
            return Ok(());
        }
        let row: AbstractRow = serde_json::from_str(line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        match papers.dense_id(&row.paper_id) {
            Some(id) => docs.push((id, row.text)),
            None => skipped += 1,
        }
        Ok(())
    })?;
    docs.sort_by_key(|(id, _)| *id);
    docs.dedup_by_key(|(id, _)| *id);
    Ok((docs, skipped))
}

pub fn decade(year: i32) -> i32 {
    year.div_euclid(10) * 10
}

/// Paper-level citation graph in compressed adjacency form. Papers keep
/// their dense ids; papers dropped by the year filter are marked and carry
/// no edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CitationGraph {
    offsets: Vec<usize>,
    targets: Vec<PaperIdx>,
    periodical: Vec<PeriodicalId>,
    year: Vec<i32>,
    retained: Vec<bool>,
    n_periodicals: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub papers_retained: usize,
    pub papers_dropped: usize,
    pub edges_retained: usize,
    pub edges_cross_decade: usize,
    pub edges_before_min_year: usize,
    pub edges_unknown: usize,
}

/// Keeps papers from `min_year` on, and an edge only when both endpoints
/// were published in the same calendar decade.
pub fn filter_decade(
    papers: &[PaperRecord],
    n_periodicals: usize,
    edges: &[CitationEdge],
    min_year: i32,
) -> (CitationGraph, FilterReport) {
    let n = papers.len();
    let mut report = FilterReport::default();
    let mut periodical = vec![0; n];
    let mut year = vec![0; n];
    let mut retained = vec![false; n];
    for p in papers {
        let i = p.dense_id as usize;
        periodical[i] = p.periodical_id;
        year[i] = p.year;
        retained[i] = p.year >= min_year;
    }
    report.papers_retained = retained.iter().filter(|&&r| r).count();
    report.papers_dropped = n - report.papers_retained;

    let mut kept: Vec<CitationEdge> = Vec::with_capacity(edges.len());
    for &e in edges {
        let (a, b) = (e.citing as usize, e.cited as usize);
        if a >= n || b >= n || a == b {
            report.edges_unknown += 1;
        } else if !retained[a] || !retained[b] {
            report.edges_before_min_year += 1;
        } else if decade(year[a]) != decade(year[b]) {
            report.edges_cross_decade += 1;
        } else {
            kept.push(e);
        }
    }
    kept.sort_unstable();
    kept.dedup();
    report.edges_retained = kept.len();

    let mut offsets = vec![0usize; n + 1];
    for e in &kept {
        offsets[e.citing as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let targets = kept.iter().map(|e| e.cited).collect();
    let n_periodicals = n_periodicals.max(periodical.iter().map(|&p| p as usize + 1).max().unwrap_or(0));
    (CitationGraph { offsets, targets, periodical, year, retained, n_periodicals }, report)
}

impl CitationGraph {
    pub fn paper_count(&self) -> usize {
        self.periodical.len()
    }

    pub fn periodical_count(&self) -> usize {
        self.n_periodicals
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Sorted, duplicate-free references of `paper`.
    pub fn references(&self, paper: PaperIdx) -> &[PaperIdx] {
        let i = paper as usize;
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn periodical_of(&self, paper: PaperIdx) -> PeriodicalId {
        self.periodical[paper as usize]
    }

    pub fn year_of(&self, paper: PaperIdx) -> i32 {
        self.year[paper as usize]
    }

    pub fn decade_of(&self, paper: PaperIdx) -> i32 {
        decade(self.year[paper as usize])
    }

    pub fn is_retained(&self, paper: PaperIdx) -> bool {
        self.retained[paper as usize]
    }

    pub fn retained_papers(&self) -> impl Iterator<Item = PaperIdx> + '_ {
        (0..self.paper_count() as PaperIdx).filter(|&p| self.retained[p as usize])
    }

    pub fn edges(&self) -> impl Iterator<Item = CitationEdge> + '_ {
        (0..self.paper_count() as PaperIdx)
            .flat_map(move |p| self.references(p).iter().map(move |&q| CitationEdge { citing: p, cited: q }))
    }

    /// Periodicals touched by at least one retained edge, ascending. This is
    /// the shared universe of the citation-derived schemes.
    pub fn active_periodicals(&self) -> Vec<PeriodicalId> {
        let mut active = vec![false; self.n_periodicals];
        for e in self.edges() {
            active[self.periodical_of(e.citing) as usize] = true;
            active[self.periodical_of(e.cited) as usize] = true;
        }
        active.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i as PeriodicalId).collect()
    }

    /// Rebuilds the paper records this graph was built from.
    pub fn paper_records(&self) -> Vec<PaperRecord> {
        (0..self.paper_count())
            .map(|i| PaperRecord {
                paper_id: i.to_string(),
                dense_id: i as PaperIdx,
                periodical_id: self.periodical[i],
                year: self.year[i],
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonoLabel {
    Labeled(AsjcArea),
    Unlabelable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonoLabelConfig {
    pub neighbors: usize,
    pub exclude_multidisciplinary: bool,
}

impl Default for MonoLabelConfig {
    fn default() -> Self {
        Self { neighbors: DEFAULT_MONOLABEL_NEIGHBORS, exclude_multidisciplinary: true }
    }
}

/// Modal area over the label sets of the labeled periodicals among the
/// `neighbors` nearest cosine peers of `periodical`. Ties go to the smallest
/// area code.
pub fn assign_scopus_monolabel(
    periodical: PeriodicalId,
    embeddings: &EmbeddingMatrix,
    registry: &PeriodicalRegistry,
    config: &MonoLabelConfig,
) -> Result<MonoLabel> {
    let peers = embeddings.cosine_top_k(periodical, config.neighbors)?;
    Ok(modal_area(peers.iter().filter_map(|(p, _)| registry.asjc(*p)), config.exclude_multidisciplinary))
}

pub(crate) fn modal_area<'a>(
    label_sets: impl Iterator<Item = &'a BTreeSet<AsjcArea>>,
    exclude_multidisciplinary: bool,
) -> MonoLabel {
    let mut counts: BTreeMap<AsjcArea, usize> = BTreeMap::new();
    for set in label_sets {
        for &area in set {
            if exclude_multidisciplinary && area == AsjcArea::MULTIDISCIPLINARY {
                continue;
            }
            *counts.entry(area).or_default() += 1;
        }
    }
    // BTreeMap iterates ascending, so strict `>` keeps the smallest code on ties.
    let mut best: Option<(AsjcArea, usize)> = None;
    for (area, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((area, count));
        }
    }
    best.map_or(MonoLabel::Unlabelable, |(a, _)| MonoLabel::Labeled(a))
}

/// Mono-labels every Scopus-matched periodical that has an embedding.
/// Returns the labels and the number of unlabelable periodicals.
pub fn scopus_monolabels(
    embeddings: &EmbeddingMatrix,
    registry: &PeriodicalRegistry,
    config: &MonoLabelConfig,
) -> Result<(BTreeMap<PeriodicalId, AsjcArea>, usize)> {
    use rayon::prelude::*;
    let targets: Vec<PeriodicalId> = registry
        .iter()
        .map(|(id, _)| id)
        .filter(|&id| registry.asjc(id).is_some() && embeddings.row_of(id).is_some())
        .collect();
    let results: Vec<(PeriodicalId, MonoLabel)> = targets
        .par_iter()
        .map(|&id| assign_scopus_monolabel(id, embeddings, registry, config).map(|l| (id, l)))
        .collect::<Result<_>>()?;
    let mut labels = BTreeMap::new();
    let mut unlabelable = 0;
    for (id, label) in results {
        match label {
            MonoLabel::Labeled(area) => {
                labels.insert(id, area);
            }
            MonoLabel::Unlabelable => unlabelable += 1,
        }
    }
    Ok((labels, unlabelable))
}
