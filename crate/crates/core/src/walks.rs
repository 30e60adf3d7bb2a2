//! Random-walk corpora: paper-level citation trails emitted as periodical
//! tokens, and node2vec walks over weighted periodical matrices.
//!
//! Every walk draws from its own RNG stream derived from
//! `(seed, source, walk_index)`, so corpora are identical regardless of
//! thread count, and are emitted in `(source, walk_index)` order.

use std::io::{BufRead, Write};
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CitationGraph, PeriodicalId};
use crate::error::{Error, Result};
use crate::io_util::{create_writer, open_reader};
use crate::matrices::PeriodicalMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_source: usize,
    pub walk_length: usize,
    pub return_param: f64,
    pub inout_param: f64,
    pub seed: u64,
}

impl WalkConfig {
    /// node2vec reference settings: `r = 10`, `l = 80`, `p = q = 1`.
    pub fn node2vec() -> Self {
        Self { walks_per_source: 10, walk_length: 80, return_param: 1.0, inout_param: 1.0, seed: 0 }
    }

    /// Paper-level citation trails: 10 trails of at most 10 papers per source.
    pub fn citation_trails() -> Self {
        Self { walks_per_source: 10, walk_length: 10, ..Self::node2vec() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.walks_per_source == 0 || self.walk_length == 0 {
            return Err(Error::Config("walks_per_source and walk_length must be >= 1".into()));
        }
        if !(self.return_param > 0.0 && self.inout_param > 0.0) {
            return Err(Error::Config("return_param and inout_param must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self::node2vec()
    }
}

/// Sequences of periodical ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrailCorpus {
    pub trails: Vec<Vec<PeriodicalId>>,
}

impl TrailCorpus {
    pub fn len(&self) -> usize {
        self.trails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trails.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.trails.iter().map(Vec::len).sum()
    }

    /// One trail per line, space-separated ids; gzip when the path ends in `.gz`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = create_writer(path)?;
        let mut out: Box<dyn Write> = if path.extension().is_some_and(|e| e == "gz") {
            Box::new(GzEncoder::new(file, Compression::default()))
        } else {
            Box::new(file)
        };
        let write_all = |out: &mut dyn Write| -> std::io::Result<()> {
            let mut line = String::new();
            for trail in &self.trails {
                line.clear();
                for (i, t) in trail.iter().enumerate() {
                    if i > 0 {
                        line.push(' ');
                    }
                    line.push_str(&t.to_string());
                }
                line.push('\n');
                out.write_all(line.as_bytes())?;
            }
            out.flush()
        };
        write_all(&mut out).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let reader = open_reader(path)?;
        let mut trails = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let trail = line
                .split_whitespace()
                .map(|t| t.parse::<PeriodicalId>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
            trails.push(trail);
        }
        Ok(Self { trails })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `(seed, a, b)`.
pub(crate) fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b)
}

fn walk_rng(seed: u64, source: u64, walk: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, source, walk))
}

/// `walks_per_source` trails from every retained paper. Each step follows a
/// uniformly chosen reference; a trail ends after `walk_length` papers or
/// at a paper without references.
pub fn generate_citation_trails(graph: &CitationGraph, config: &WalkConfig) -> Result<TrailCorpus> {
    config.validate()?;
    let sources: Vec<u32> = graph.retained_papers().collect();
    if sources.is_empty() {
        return Err(Error::InvalidInput("citation graph has no papers".into()));
    }
    let trails = sources
        .par_iter()
        .flat_map_iter(|&source| {
            (0..config.walks_per_source).map(move |w| {
                let mut rng = walk_rng(config.seed, source as u64, w as u64);
                let mut paper = source;
                let mut trail = Vec::with_capacity(config.walk_length);
                trail.push(graph.periodical_of(paper));
                while trail.len() < config.walk_length {
                    let refs = graph.references(paper);
                    if refs.is_empty() {
                        break;
                    }
                    paper = refs[rng.random_range(0..refs.len())];
                    trail.push(graph.periodical_of(paper));
                }
                trail
            })
        })
        .collect();
    Ok(TrailCorpus { trails })
}

/// Weighted adjacency with per-node samplers for first-order steps.
struct WeightedGraph<'a> {
    matrix: &'a PeriodicalMatrix,
    samplers: Vec<Option<WeightedIndex<f64>>>,
}

impl<'a> WeightedGraph<'a> {
    fn new(matrix: &'a PeriodicalMatrix) -> Self {
        let samplers = (0..matrix.dimension() as u32)
            .map(|i| WeightedIndex::new(matrix.row(i).iter().map(|&(_, w)| w)).ok())
            .collect();
        Self { matrix, samplers }
    }

    fn first_order(&self, node: u32, rng: &mut impl Rng) -> Option<u32> {
        let sampler = self.samplers[node as usize].as_ref()?;
        Some(self.matrix.row(node)[sampler.sample(rng)].0)
    }

    fn is_edge(&self, from: u32, to: u32) -> bool {
        self.matrix.row(from).binary_search_by_key(&to, |&(c, _)| c).is_ok()
    }

    /// Second-order step from `cur` having arrived from `prev`.
    fn biased(&self, prev: u32, cur: u32, p: f64, q: f64, rng: &mut impl Rng) -> Option<u32> {
        let row = self.matrix.row(cur);
        if row.is_empty() {
            return None;
        }
        let weight = |&(x, w): &(u32, f64)| {
            if x == prev {
                w / p
            } else if self.is_edge(prev, x) {
                w
            } else {
                w / q
            }
        };
        let total: f64 = row.iter().map(weight).sum();
        if total <= 0.0 {
            return None;
        }
        let mut target = rng.random::<f64>() * total;
        for entry in row {
            target -= weight(entry);
            if target < 0.0 {
                return Some(entry.0);
            }
        }
        row.last().map(|&(x, _)| x)
    }
}

/// node2vec walks over the non-negative weights of `matrix`, `walks_per_source`
/// walks of up to `walk_length` nodes from every node. With `p = q = 1`
/// this is first-order weight-proportional sampling.
pub fn node2vec_walks(matrix: &PeriodicalMatrix, config: &WalkConfig) -> Result<TrailCorpus> {
    config.validate()?;
    let graph = WeightedGraph::new(matrix);
    let unbiased = config.return_param == 1.0 && config.inout_param == 1.0;
    let trails = (0..matrix.dimension() as u32)
        .into_par_iter()
        .flat_map_iter(|source| {
            let graph = &graph;
            (0..config.walks_per_source).map(move |w| {
                let mut rng = walk_rng(config.seed, source as u64, w as u64);
                let mut walk = Vec::with_capacity(config.walk_length);
                walk.push(source);
                while walk.len() < config.walk_length {
                    let cur = *walk.last().unwrap();
                    let next = if unbiased || walk.len() == 1 {
                        graph.first_order(cur, &mut rng)
                    } else {
                        let prev = walk[walk.len() - 2];
                        graph.biased(prev, cur, config.return_param, config.inout_param, &mut rng)
                    };
                    match next {
                        Some(n) => walk.push(n),
                        None => break,
                    }
                }
                walk
            })
        })
        .collect();
    Ok(TrailCorpus { trails })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{filter_decade, CitationEdge, PaperRecord};
    use crate::matrices::MatrixKind;

    fn chain_graph() -> CitationGraph {
        let papers: Vec<PaperRecord> = (0..3)
            .map(|i| PaperRecord { paper_id: i.to_string(), dense_id: i, periodical_id: i, year: 2012 })
            .collect();
        let edges = [CitationEdge { citing: 0, cited: 1 }, CitationEdge { citing: 1, cited: 2 }];
        filter_decade(&papers, 3, &edges, 2010).0
    }

    #[test]
    fn trails_follow_references_and_stop_at_dead_ends() {
        let g = chain_graph();
        let cfg = WalkConfig { walks_per_source: 2, walk_length: 80, ..WalkConfig::citation_trails() };
        let corpus = generate_citation_trails(&g, &cfg).unwrap();
        assert_eq!(corpus.len(), 6);
        assert_eq!(corpus.trails[0], vec![0, 1, 2]);
        assert_eq!(corpus.trails[2], vec![1, 2]);
        assert_eq!(corpus.trails[4], vec![2]);

        let short = WalkConfig { walk_length: 2, ..cfg };
        let corpus = generate_citation_trails(&g, &short).unwrap();
        assert_eq!(corpus.trails[0], vec![0, 1]);
    }

    #[test]
    fn trails_are_thread_count_independent() {
        let g = chain_graph();
        let cfg = WalkConfig::citation_trails();
        let a = generate_citation_trails(&g, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| generate_citation_trails(&g, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config_rejected() {
        let g = chain_graph();
        let cfg = WalkConfig { walk_length: 0, ..WalkConfig::citation_trails() };
        assert!(generate_citation_trails(&g, &cfg).is_err());
        let cfg = WalkConfig { inout_param: 0.0, ..WalkConfig::node2vec() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn isolated_node_yields_singleton_walk() {
        let m = PeriodicalMatrix::from_rows(MatrixKind::Citation, vec![vec![], vec![(0, 1.0)]]).unwrap();
        let corpus = node2vec_walks(&m, &WalkConfig { walks_per_source: 1, ..WalkConfig::node2vec() }).unwrap();
        assert_eq!(corpus.trails[0], vec![0]);
        assert_eq!(corpus.trails[1], vec![1, 0]);
    }

    #[test]
    fn single_step_frequencies_follow_weights() {
        // A -> {B: 3, C: 1}; expected P(B) = 0.75, sd = sqrt(.75*.25/10000) ~ 0.0043.
        let m =
            PeriodicalMatrix::from_rows(MatrixKind::Citation, vec![vec![(1, 3.0), (2, 1.0)], vec![], vec![]]).unwrap();
        let cfg = WalkConfig { walks_per_source: 10_000, walk_length: 2, seed: 7, ..WalkConfig::node2vec() };
        let corpus = node2vec_walks(&m, &cfg).unwrap();
        let from_a: Vec<_> = corpus.trails.iter().filter(|t| t[0] == 0).collect();
        assert_eq!(from_a.len(), 10_000);
        let b = from_a.iter().filter(|t| t[1] == 1).count() as f64 / 10_000.0;
        assert!((b - 0.75).abs() < 0.02, "P(B) = {b}");
    }

    #[test]
    fn next_step_chi_square() {
        let weights = [1.0, 2.0, 3.0, 4.0];
        let row: Vec<(u32, f64)> = weights.iter().enumerate().map(|(i, &w)| (i as u32 + 1, w)).collect();
        let mut rows = vec![row];
        rows.extend(std::iter::repeat_n(Vec::new(), 4));
        let m = PeriodicalMatrix::from_rows(MatrixKind::Citation, rows).unwrap();
        let n = 20_000;
        let cfg = WalkConfig { walks_per_source: n, walk_length: 2, seed: 3, ..WalkConfig::node2vec() };
        let corpus = node2vec_walks(&m, &cfg).unwrap();
        let mut counts = [0.0f64; 4];
        for t in corpus.trails.iter().filter(|t| t[0] == 0) {
            counts[t[1] as usize - 1] += 1.0;
        }
        let chi2: f64 = counts
            .iter()
            .zip(weights)
            .map(|(&o, w)| {
                let e = n as f64 * w / 10.0;
                (o - e).powi(2) / e
            })
            .sum();
        // 3 degrees of freedom, 0.999 quantile.
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn return_and_inout_bias() {
        // Path A - B - C (undirected). From A: step to B, then back to A with
        // weight 1/p or on to C with weight 1/q. p = 0.5, q = 2 -> P(A) = 0.8.
        let m = PeriodicalMatrix::from_rows(
            MatrixKind::CoCitation,
            vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 1.0)], vec![(1, 1.0)]],
        )
        .unwrap();
        let cfg =
            WalkConfig { walks_per_source: 10_000, walk_length: 3, return_param: 0.5, inout_param: 2.0, seed: 11 };
        let corpus = node2vec_walks(&m, &cfg).unwrap();
        let from_a: Vec<_> = corpus.trails.iter().filter(|t| t[0] == 0).collect();
        let back = from_a.iter().filter(|t| t[2] == 0).count() as f64 / from_a.len() as f64;
        // sd = sqrt(.8*.2/10000) = 0.004
        assert!((back - 0.8).abs() < 0.012, "P(return) = {back}");
    }

    #[test]
    fn corpus_file_round_trip() {
        let corpus = TrailCorpus { trails: vec![vec![0, 5, 2], vec![7]] };
        let dir = tempfile::tempdir().unwrap();
        for name in ["c.txt", "c.txt.gz"] {
            let path = dir.path().join(name);
            corpus.write(&path).unwrap();
            assert_eq!(TrailCorpus::read(&path).unwrap(), corpus);
        }
        let text = std::fs::read_to_string(dir.path().join("c.txt")).unwrap();
        assert_eq!(text, "0 5 2\n7\n");
    }
}
