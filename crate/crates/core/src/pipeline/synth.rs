//! Planted-partition test corpora: communities of periodicals whose papers
//! mostly cite within their community and write abstracts from a
//! community-specific vocabulary.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::{write_json, write_with};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub communities: usize,
    pub papers_per_community: usize,
    pub periodicals_per_community: usize,
    pub vocab_per_community: usize,
    pub references_per_paper: usize,
    /// Probability that a reference is drawn from the citing paper's own
    /// community; otherwise it is drawn from the whole corpus.
    pub intra_rate: f64,
    pub words_per_abstract: usize,
    /// Probability that an abstract word comes from a vocabulary shared by
    /// all communities.
    pub shared_word_rate: f64,
    pub shared_vocab: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            communities: 4,
            papers_per_community: 500,
            periodicals_per_community: 10,
            vocab_per_community: 50,
            references_per_paper: 8,
            intra_rate: 0.9,
            words_per_abstract: 40,
            shared_word_rate: 0.0,
            shared_vocab: 100,
            first_year: 2010,
            last_year: 2019,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        if self.communities < 2 {
            return fail("need at least 2 communities");
        }
        if self.papers_per_community < 2 || self.periodicals_per_community == 0 || self.vocab_per_community == 0 {
            return fail("each community needs >= 2 papers, >= 1 periodical and >= 1 word");
        }
        if self.words_per_abstract == 0 {
            return fail("abstracts need at least one word");
        }
        if !(0.0..=1.0).contains(&self.intra_rate) || !(0.0..=1.0).contains(&self.shared_word_rate) {
            return fail("rates must lie in [0, 1]");
        }
        if self.shared_word_rate > 0.0 && self.shared_vocab == 0 {
            return fail("shared words requested with an empty shared vocabulary");
        }
        if self.references_per_paper >= self.papers_per_community {
            return fail("references per paper must be below the community size");
        }
        if self.first_year > self.last_year || self.first_year < crate::data::MIN_YEAR {
            return fail("bad year range");
        }
        Ok(())
    }

    pub fn periodical_name(community: usize, j: usize) -> String {
        format!("journal c{community} n{j}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthFiles {
    pub papers: PathBuf,
    pub citations: PathBuf,
    pub abstracts: PathBuf,
    pub scopus: PathBuf,
    /// `periodical_name \t community`
    pub labels: PathBuf,
}

/// Writes `papers.tsv`, `citations.tsv`, `abstracts.jsonl`, `scopus.tsv`,
/// `labels.tsv` and `spec.json` into `dir`. The same spec and seed always
/// produce the same bytes.
pub fn generate_synthetic_corpus(spec: &SynthSpec, dir: &Path) -> Result<SynthFiles> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.communities * spec.papers_per_community;
    let community_of = |paper: usize| paper / spec.papers_per_community;
    let files = SynthFiles {
        papers: dir.join("papers.tsv"),
        citations: dir.join("citations.tsv"),
        abstracts: dir.join("abstracts.jsonl"),
        scopus: dir.join("scopus.tsv"),
        labels: dir.join("labels.tsv"),
    };

    let venues: Vec<usize> = (0..n).map(|_| rng.random_range(0..spec.periodicals_per_community)).collect();
    let years: Vec<i32> = (0..n).map(|_| rng.random_range(spec.first_year..=spec.last_year)).collect();
    write_with(&files.papers, |w| {
        for p in 0..n {
            writeln!(w, "p{p}\t{}\t{}", SynthSpec::periodical_name(community_of(p), venues[p]), years[p])?;
        }
        Ok(())
    })?;

    let mut citations = Vec::with_capacity(n * spec.references_per_paper);
    for p in 0..n {
        let c = community_of(p);
        let mut refs = BTreeSet::new();
        while refs.len() < spec.references_per_paper {
            let target = if rng.random::<f64>() < spec.intra_rate {
                c * spec.papers_per_community + rng.random_range(0..spec.papers_per_community)
            } else {
                rng.random_range(0..n)
            };
            if target != p {
                refs.insert(target);
            }
        }
        citations.extend(refs.into_iter().map(|t| (p, t)));
    }
    write_with(&files.citations, |w| {
        for (a, b) in &citations {
            writeln!(w, "p{a}\tp{b}")?;
        }
        Ok(())
    })?;

    let mut abstracts = Vec::with_capacity(n);
    for p in 0..n {
        let words: Vec<String> = (0..spec.words_per_abstract)
            .map(|_| {
                if rng.random::<f64>() < spec.shared_word_rate {
                    format!("common{}", rng.random_range(0..spec.shared_vocab))
                } else {
                    format!("c{}term{}", community_of(p), rng.random_range(0..spec.vocab_per_community))
                }
            })
            .collect();
        abstracts.push(serde_json::json!({ "paper_id": format!("p{p}"), "text": words.join(" ") }).to_string());
    }
    write_with(&files.abstracts, |w| {
        for line in &abstracts {
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;

    // Communities map onto distinct subject areas 1100, 1200, ...
    write_with(&files.scopus, |w| {
        for c in 0..spec.communities {
            for j in 0..spec.periodicals_per_community {
                writeln!(w, "{}\t{}", SynthSpec::periodical_name(c, j), 1100 + 100 * (c % 26))?;
            }
        }
        Ok(())
    })?;
    write_with(&files.labels, |w| {
        for c in 0..spec.communities {
            for j in 0..spec.periodicals_per_community {
                writeln!(w, "{}\t{c}", SynthSpec::periodical_name(c, j))?;
            }
        }
        Ok(())
    })?;
    write_json(&dir.join("spec.json"), spec)?;
    Ok(files)
}

/// Reads `labels.tsv` back as `(periodical_name, community)` pairs.
pub fn read_labels(path: &Path) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::new();
    crate::io_util::for_each_line(path, |line_no, line| {
        if line.is_empty() {
            return Ok(());
        }
        let parsed = line.rsplit_once('\t').and_then(|(name, c)| Some((name.to_string(), c.parse().ok()?)));
        out.push(parsed.ok_or_else(|| Error::parse(path, line_no, "expected `name \\t community`"))?);
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{filter_decade, ingest_citations, ingest_papers, ingest_scopus, read_abstracts};

    fn small() -> SynthSpec {
        SynthSpec {
            papers_per_community: 40,
            periodicals_per_community: 3,
            references_per_paper: 4,
            words_per_abstract: 10,
            ..Default::default()
        }
    }

    #[test]
    fn corpus_ingests_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small();
        let files = generate_synthetic_corpus(&spec, dir.path()).unwrap();
        let (mut registry, papers, summary) = ingest_papers(&files.papers).unwrap();
        assert_eq!(summary.papers, 160);
        assert_eq!(registry.len(), 12);
        let (edges, cs) = ingest_citations(&files.citations, &papers).unwrap();
        assert_eq!(cs.edges, 160 * 4);
        let (graph, report) = filter_decade(&papers.papers, registry.len(), &edges, 2010);
        assert_eq!(report.edges_retained, 640);
        assert_eq!(graph.edge_count(), 640);
        assert_eq!(ingest_scopus(&files.scopus, &mut registry).unwrap().matched, 12);
        let (docs, skipped) = read_abstracts(&files.abstracts, &papers).unwrap();
        assert_eq!((docs.len(), skipped), (160, 0));
        assert_eq!(read_labels(&files.labels).unwrap().len(), 12);
    }

    #[test]
    fn intra_rate_controls_mixing() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec { intra_rate: 1.0, ..small() };
        let files = generate_synthetic_corpus(&spec, dir.path()).unwrap();
        let text = std::fs::read_to_string(files.citations).unwrap();
        for line in text.lines() {
            let (a, b) = line.split_once('\t').unwrap();
            let id = |s: &str| s[1..].parse::<usize>().unwrap() / 40;
            assert_eq!(id(a), id(b));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        generate_synthetic_corpus(&small(), d1.path()).unwrap();
        generate_synthetic_corpus(&small(), d2.path()).unwrap();
        for f in ["papers.tsv", "citations.tsv", "abstracts.jsonl", "scopus.tsv", "labels.tsv", "spec.json"] {
            assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap());
        }
        let d3 = tempfile::tempdir().unwrap();
        generate_synthetic_corpus(&SynthSpec { seed: 1, ..small() }, d3.path()).unwrap();
        assert_ne!(
            std::fs::read(d1.path().join("citations.tsv")).unwrap(),
            std::fs::read(d3.path().join("citations.tsv")).unwrap()
        );
    }

    #[test]
    fn degenerate_specs_fail() {
        let dir = tempfile::tempdir().unwrap();
        for spec in [
            SynthSpec { communities: 1, ..small() },
            SynthSpec { intra_rate: 1.5, ..small() },
            SynthSpec { references_per_paper: 40, ..small() },
        ] {
            assert!(generate_synthetic_corpus(&spec, dir.path()).unwrap_err().is_validation());
        }
    }
}
