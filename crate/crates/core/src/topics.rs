//! Latent Dirichlet allocation by collapsed Gibbs sampling, topic-count
//! selection by coherence, and dominant-topic assignment.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::tokenize;
use crate::error::{Error, Result};
use crate::io_util::write_with;

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_BURN_IN: usize = 200;
pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_TOP_WORDS: usize = 10;
pub const DEFAULT_SAMPLE_FRACTION: f64 = 0.05;

/// 10, 20, ..., 200.
pub fn default_topic_grid() -> Vec<usize> {
    (10..=200).step_by(10).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub topics: usize,
    /// Document prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            topics: 30,
            alpha: None,
            beta: DEFAULT_BETA,
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::Config(format!("need at least 2 topics, got {}", self.topics)));
        }
        if !(self.alpha() > 0.0) || !(self.beta > 0.0) {
            return Err(Error::Config("LDA priors must be > 0".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be shorter than the run ({} sweeps)",
                self.burn_in, self.iterations
            )));
        }
        Ok(())
    }
}

/// Documents as word-id sequences over a sorted vocabulary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LdaCorpus {
    pub doc_ids: Vec<String>,
    pub docs: Vec<Vec<u32>>,
    pub vocab: Vec<String>,
    pub dropped_empty: usize,
}

impl LdaCorpus {
    pub fn from_texts<I, S, T>(items: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut tokenized = Vec::new();
        let mut dropped_empty = 0;
        for (id, text) in items {
            let tokens: Vec<String> = tokenize(text.as_ref()).collect();
            if tokens.is_empty() {
                dropped_empty += 1;
            } else {
                tokenized.push((id.into(), tokens));
            }
        }
        if dropped_empty > 0 {
            log::warn!("dropped {dropped_empty} empty documents");
        }
        let words: BTreeSet<&str> = tokenized.iter().flat_map(|(_, t)| t.iter().map(String::as_str)).collect();
        let index: BTreeMap<&str, u32> = words.iter().enumerate().map(|(i, &w)| (w, i as u32)).collect();
        let docs = tokenized.iter().map(|(_, t)| t.iter().map(|w| index[w.as_str()]).collect()).collect();
        let vocab = words.iter().map(|w| w.to_string()).collect();
        let doc_ids = tokenized.into_iter().map(|(id, _)| id).collect();
        Self { doc_ids, docs, vocab, dropped_empty }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Deterministic subset of `ceil(fraction * len)` documents (at least one),
    /// kept in original order.
    pub fn sample(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!("sample fraction must lie in (0, 1], got {fraction}")));
        }
        let n = self.len();
        let k = ((fraction * n as f64).ceil() as usize).clamp(1.min(n), n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, n, k).into_vec();
        picked.sort_unstable();
        Ok(Self {
            doc_ids: picked.iter().map(|&i| self.doc_ids[i].clone()).collect(),
            docs: picked.iter().map(|&i| self.docs[i].clone()).collect(),
            vocab: self.vocab.clone(),
            dropped_empty: 0,
        })
    }
}

/// Collapsed Gibbs sampler state.
pub struct LdaSampler<'a> {
    corpus: &'a LdaCorpus,
    topics: usize,
    alpha: f64,
    beta: f64,
    z: Vec<Vec<u32>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u64>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl<'a> LdaSampler<'a> {
    pub fn new(corpus: &'a LdaCorpus, config: &LdaConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::InvalidInput("LDA corpus is empty".into()));
        }
        if corpus.vocab.len() < config.topics {
            return Err(Error::InvalidInput(format!(
                "vocabulary of {} words is smaller than {} topics",
                corpus.vocab.len(),
                config.topics
            )));
        }
        let t = config.topics;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut doc_topic = vec![vec![0u32; t]; corpus.len()];
        let mut topic_word = vec![vec![0u32; corpus.vocab.len()]; t];
        let mut topic_total = vec![0u64; t];
        let z = corpus
            .docs
            .iter()
            .enumerate()
            .map(|(d, words)| {
                words
                    .iter()
                    .map(|&w| {
                        let k = rng.random_range(0..t);
                        doc_topic[d][k] += 1;
                        topic_word[k][w as usize] += 1;
                        topic_total[k] += 1;
                        k as u32
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            corpus,
            topics: t,
            alpha: config.alpha(),
            beta: config.beta,
            z,
            doc_topic,
            topic_word,
            topic_total,
            rng,
            weights: vec![0.0; t],
        })
    }

    pub fn sweep(&mut self) {
        let v_beta = self.corpus.vocab.len() as f64 * self.beta;
        for (d, words) in self.corpus.docs.iter().enumerate() {
            for (i, &w) in words.iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][i] as usize;
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for k in 0..self.topics {
                    total += (f64::from(self.doc_topic[d][k]) + self.alpha)
                        * (f64::from(self.topic_word[k][w]) + self.beta)
                        / (self.topic_total[k] as f64 + v_beta);
                    self.weights[k] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.partition_point(|&c| c <= u).min(self.topics - 1);

                self.z[d][i] = new as u32;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    /// Sum of the topic-word count table.
    pub fn assigned_tokens(&self) -> u64 {
        self.topic_word.iter().flatten().map(|&c| u64::from(c)).sum()
    }

    fn estimates(&self, doc_topic: &[Vec<f64>], topic_word: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let theta = doc_topic.iter().map(|row| normalized(row.iter().map(|&c| c + self.alpha))).collect();
        let phi = topic_word.iter().map(|row| normalized(row.iter().map(|&c| c + self.beta))).collect();
        (theta, phi)
    }

    /// Mean per-token log predictive probability under the current counts.
    pub fn log_likelihood(&self) -> f64 {
        let dt: Vec<Vec<f64>> = self.doc_topic.iter().map(|r| r.iter().map(|&c| f64::from(c)).collect()).collect();
        let tw: Vec<Vec<f64>> = self.topic_word.iter().map(|r| r.iter().map(|&c| f64::from(c)).collect()).collect();
        let (theta, phi) = self.estimates(&dt, &tw);
        token_log_likelihood(self.corpus, &theta, &phi)
    }
}

fn normalized(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let v: Vec<f64> = values.collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn token_log_likelihood(corpus: &LdaCorpus, theta: &[Vec<f64>], phi: &[Vec<f64>]) -> f64 {
    let mut ll = 0.0;
    for (d, words) in corpus.docs.iter().enumerate() {
        for &w in words {
            let p: f64 = theta[d].iter().zip(phi).map(|(t, row)| t * row[w as usize]).sum();
            ll += p.ln();
        }
    }
    ll / corpus.token_count() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub config: LdaConfig,
    /// Document-topic distributions, one row per document.
    pub theta: Vec<Vec<f64>>,
    /// Topic-word distributions, one row per topic.
    pub phi: Vec<Vec<f64>>,
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
}

impl LdaModel {
    pub fn topics(&self) -> usize {
        self.phi.len()
    }

    /// Word ids of topic `k` by descending probability (ties by id).
    pub fn top_words(&self, k: usize, n: usize) -> Vec<u32> {
        let mut ids: Vec<u32> = (0..self.phi[k].len() as u32).collect();
        ids.sort_by(|&a, &b| self.phi[k][b as usize].total_cmp(&self.phi[k][a as usize]).then(a.cmp(&b)));
        ids.truncate(n);
        ids
    }
}

/// Runs `iterations` sweeps and estimates theta and phi from counts
/// averaged over the post-burn-in sweeps.
pub fn fit_lda(corpus: &LdaCorpus, config: &LdaConfig) -> Result<LdaModel> {
    fit_lda_observed(corpus, config, |_, _| {})
}

/// As [`fit_lda`], calling `observe(sweep, sampler)` after every sweep.
pub fn fit_lda_observed<F>(corpus: &LdaCorpus, config: &LdaConfig, mut observe: F) -> Result<LdaModel>
where
    F: FnMut(usize, &LdaSampler<'_>),
{
    let mut sampler = LdaSampler::new(corpus, config)?;
    let initial_log_likelihood = sampler.log_likelihood();
    let t = config.topics;
    let mut dt_sum = vec![vec![0.0; t]; corpus.len()];
    let mut tw_sum = vec![vec![0.0; corpus.vocab.len()]; t];
    for it in 0..config.iterations {
        sampler.sweep();
        observe(it, &sampler);
        if it >= config.burn_in {
            for (acc, row) in dt_sum.iter_mut().zip(&sampler.doc_topic) {
                acc.iter_mut().zip(row).for_each(|(a, &c)| *a += f64::from(c));
            }
            for (acc, row) in tw_sum.iter_mut().zip(&sampler.topic_word) {
                acc.iter_mut().zip(row).for_each(|(a, &c)| *a += f64::from(c));
            }
        }
    }
    let samples = (config.iterations - config.burn_in) as f64;
    dt_sum.iter_mut().flatten().for_each(|v| *v /= samples);
    tw_sum.iter_mut().flatten().for_each(|v| *v /= samples);
    let (theta, phi) = sampler.estimates(&dt_sum, &tw_sum);
    let final_log_likelihood = token_log_likelihood(corpus, &theta, &phi);
    Ok(LdaModel { config: config.clone(), theta, phi, initial_log_likelihood, final_log_likelihood })
}

/// Arg-max topic per document, smallest index on ties.
pub fn dominant_topic(theta: &[Vec<f64>]) -> Vec<usize> {
    theta.iter().map(|row| crate::classify::argmax(row)).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoherenceMeasure {
    #[default]
    UMass,
    /// NPMI context vectors compared by cosine, with whole documents as
    /// the co-occurrence window.
    Cv,
}

/// Document sets per word, for co-occurrence counting.
pub struct CooccurrenceIndex {
    docs_of: Vec<Vec<u32>>,
    n_docs: usize,
}

impl CooccurrenceIndex {
    pub fn new(corpus: &LdaCorpus) -> Self {
        let mut docs_of = vec![Vec::new(); corpus.vocab.len()];
        for (d, words) in corpus.docs.iter().enumerate() {
            let unique: BTreeSet<u32> = words.iter().copied().collect();
            for w in unique {
                docs_of[w as usize].push(d as u32);
            }
        }
        Self { docs_of, n_docs: corpus.len() }
    }

    pub fn df(&self, w: u32) -> usize {
        self.docs_of[w as usize].len()
    }

    pub fn co_df(&self, a: u32, b: u32) -> usize {
        let (x, y) = (&self.docs_of[a as usize], &self.docs_of[b as usize]);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// `sum_{m>l} log((D(w_m, w_l) + 1) / D(w_l))` over words ordered by rank.
pub fn umass_coherence(top: &[u32], index: &CooccurrenceIndex) -> f64 {
    let mut score = 0.0;
    for m in 1..top.len() {
        for l in 0..m {
            let d_l = index.df(top[l]).max(1) as f64;
            score += ((index.co_df(top[m], top[l]) as f64 + 1.0) / d_l).ln();
        }
    }
    score
}

fn npmi(a: u32, b: u32, index: &CooccurrenceIndex) -> f64 {
    const EPS: f64 = 1e-12;
    let n = index.n_docs as f64;
    let p_ab = index.co_df(a, b) as f64 / n;
    let p_a = index.df(a) as f64 / n;
    let p_b = index.df(b) as f64 / n;
    let pmi = ((p_ab + EPS) / (p_a * p_b + EPS)).ln();
    pmi / -(p_ab + EPS).ln()
}

/// Mean cosine between each top word's NPMI vector and the topic's summed vector.
pub fn cv_coherence(top: &[u32], index: &CooccurrenceIndex) -> f64 {
    let vectors: Vec<Vec<f64>> = top.iter().map(|&a| top.iter().map(|&b| npmi(a, b, index)).collect()).collect();
    let total: Vec<f64> = (0..top.len()).map(|j| vectors.iter().map(|v| v[j]).sum()).collect();
    let cos = |v: &[f64]| {
        let dot: f64 = v.iter().zip(&total).map(|(a, b)| a * b).sum();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nt = total.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv == 0.0 || nt == 0.0 {
            0.0
        } else {
            dot / (nv * nt)
        }
    };
    vectors.iter().map(|v| cos(v)).sum::<f64>() / top.len() as f64
}

/// Mean per-topic coherence of a fitted model.
pub fn model_coherence(model: &LdaModel, corpus: &LdaCorpus, measure: CoherenceMeasure, top_n: usize) -> f64 {
    let index = CooccurrenceIndex::new(corpus);
    let per_topic: Vec<f64> = (0..model.topics())
        .map(|k| {
            let top = model.top_words(k, top_n);
            match measure {
                CoherenceMeasure::UMass => umass_coherence(&top, &index),
                CoherenceMeasure::Cv => cv_coherence(&top, &index),
            }
        })
        .collect();
    per_topic.iter().sum::<f64>() / per_topic.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub topics: usize,
    pub coherence: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceScan {
    pub measure: CoherenceMeasure,
    pub sampled_documents: usize,
    pub entries: Vec<ScanEntry>,
    pub selected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub grid: Vec<usize>,
    pub sample_fraction: f64,
    pub measure: CoherenceMeasure,
    pub top_words: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            grid: default_topic_grid(),
            sample_fraction: DEFAULT_SAMPLE_FRACTION,
            measure: CoherenceMeasure::UMass,
            top_words: DEFAULT_TOP_WORDS,
        }
    }
}

/// Fits one model per grid value on a document sample and selects the most
/// coherent topic count (smallest on ties). Failing grid points are recorded
/// and skipped.
pub fn coherence_scan(corpus: &LdaCorpus, scan: &ScanConfig, base: &LdaConfig) -> Result<CoherenceScan> {
    if scan.grid.is_empty() {
        return Err(Error::Config("topic grid is empty".into()));
    }
    let subset = corpus.sample(scan.sample_fraction, base.seed)?;
    let entries: Vec<ScanEntry> = scan
        .grid
        .par_iter()
        .map(|&t| {
            let cfg = LdaConfig { topics: t, alpha: None, ..base.clone() };
            match fit_lda(&subset, &cfg) {
                Ok(model) => ScanEntry {
                    topics: t,
                    coherence: Some(model_coherence(&model, &subset, scan.measure, scan.top_words)),
                    error: None,
                },
                Err(e) => {
                    log::warn!("coherence scan: T={t} failed: {e}");
                    ScanEntry { topics: t, coherence: None, error: Some(e.to_string()) }
                }
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for e in &entries {
        if let Some(c) = e.coherence {
            let better = match best {
                None => true,
                Some((bt, bc)) => c > bc || (c == bc && e.topics < bt),
            };
            if better {
                best = Some((e.topics, c));
            }
        }
    }
    let (selected, _) = best.ok_or_else(|| Error::Undefined("every topic count in the grid failed".into()))?;
    Ok(CoherenceScan { measure: scan.measure, sampled_documents: subset.len(), entries, selected })
}

/// `doc_id \t t1,...,tT`
pub fn write_theta(path: &Path, corpus: &LdaCorpus, model: &LdaModel) -> Result<()> {
    write_with(path, |w| {
        for (id, row) in corpus.doc_ids.iter().zip(&model.theta) {
            let joined: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{id}\t{}", joined.join(","))?;
        }
        Ok(())
    })
}

/// `topic \t rank \t word \t probability` for the top words of every topic.
pub fn write_topic_report(path: &Path, corpus: &LdaCorpus, model: &LdaModel, top_n: usize) -> Result<()> {
    write_with(path, |w| {
        for k in 0..model.topics() {
            for (rank, word) in model.top_words(k, top_n).into_iter().enumerate() {
                writeln!(w, "{k}\t{}\t{}\t{}", rank + 1, corpus.vocab[word as usize], model.phi[k][word as usize])?;
            }
        }
        Ok(())
    })
}
