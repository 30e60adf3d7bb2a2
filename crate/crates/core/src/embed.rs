//! Skip-gram with negative sampling over trail corpora, plus cosine
//! neighbour queries on the resulting vectors.
//!
//! Two training modes share one update rule: a single-threaded mode that is
//! bit-reproducible for a given seed, and an asynchronous multi-worker mode
//! where workers update a shared parameter block without locking (lost
//! updates are tolerated, results vary between runs).

use std::cell::Cell;
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::{open_reader, write_with};
use crate::walks::{stream_seed, TrailCorpus};

pub const DEFAULT_DIMENSION: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Word2vec-style frequent-token downsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
    pub seed: u64,
    /// `1` selects the reproducible single-threaded mode.
    pub workers: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            subsample: None,
            seed: 0,
            workers: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.window == 0 || self.negatives == 0 || self.epochs == 0 {
            return Err(Error::Config("dimension, window, negatives and epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.subsample.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("subsample threshold must be > 0".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Row-major `V x d` vectors with a token -> row index.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<u32>,
    dim: usize,
    data: Vec<f64>,
    context: Option<Vec<f64>>,
    index: HashMap<u32, usize>,
}

impl EmbeddingMatrix {
    pub fn from_rows(tokens: Vec<u32>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if tokens.len() != rows.len() {
            return Err(Error::DimensionMismatch { expected: tokens.len(), actual: rows.len() });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(tokens, dim, data)
    }

    fn from_flat(tokens: Vec<u32>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("embedding contains non-finite values".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (row, &t) in tokens.iter().enumerate() {
            if index.insert(t, row).is_some() {
                return Err(Error::InvalidInput(format!("token {t} appears twice")));
            }
        }
        Ok(Self { tokens, dim, data, context: None, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn row_of(&self, token: u32) -> Option<usize> {
        self.index.get(&token).copied()
    }

    pub fn vector(&self, token: u32) -> Option<&[f64]> {
        self.row_of(token).map(|r| self.row(r))
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Output (context) vectors kept from training, if any.
    pub fn context(&self) -> Option<&[f64]> {
        self.context.as_deref()
    }

    pub fn drop_context(&mut self) {
        self.context = None;
    }

    /// The `k` most cosine-similar other tokens, most similar first, ties
    /// broken by ascending token id.
    pub fn cosine_top_k(&self, query: u32, k: usize) -> Result<Vec<(u32, f64)>> {
        let q = self.vector(query).ok_or(Error::UnknownToken(query))?;
        if k == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        let qn = norm(q);
        let mut scored: Vec<(u32, f64)> = self
            .tokens
            .iter()
            .enumerate()
            .filter(|&(_, &t)| t != query)
            .map(|(r, &t)| (t, cosine_with_norms(q, qn, self.row(r))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Text format: `V d` header, then `token v1 ... vd` per row.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_with(path, |w| {
            writeln!(w, "{} {}", self.len(), self.dim)?;
            let mut line = String::new();
            for (r, t) in self.tokens.iter().enumerate() {
                line.clear();
                line.push_str(&t.to_string());
                for v in self.row(r) {
                    line.push(' ');
                    line.push_str(&v.to_string());
                }
                line.push('\n');
                w.write_all(line.as_bytes())?;
            }
            Ok(())
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut lines = open_reader(path)?.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::parse(path, 1, "missing `V d` header")),
        };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| Error::parse(path, 1, "bad `V d` header"))?;
        let [v, d] = dims[..] else {
            return Err(Error::parse(path, 1, "bad `V d` header"));
        };
        let mut tokens = Vec::with_capacity(v);
        let mut data = Vec::with_capacity(v * d);
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(path, idx + 1, "bad token id"))?;
            let before = data.len();
            for f in fields {
                data.push(f.parse::<f64>().map_err(|_| Error::parse(path, idx + 1, "bad value"))?);
            }
            if data.len() - before != d {
                return Err(Error::parse(path, idx + 1, format!("expected {d} values")));
            }
            tokens.push(token);
        }
        if tokens.len() != v {
            return Err(Error::parse(path, 1, format!("header says {v} rows, found {}", tokens.len())));
        }
        Self::from_flat(tokens, d, data)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cosine_with_norms(a: &[f64], an: f64, b: &[f64]) -> f64 {
    let bn = norm(b);
    if an == 0.0 || bn == 0.0 {
        0.0
    } else {
        dot(a, b) / (an * bn)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine_with_norms(a, norm(a), b)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-log sigma(x)`, computed without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Negative-sampling loss of one (input, context) pair with its noise
/// samples: `-log sigma(u.v) - sum log sigma(-u.n)`.
pub fn pair_loss(input: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    neg_log_sigmoid(dot(input, context)) + negatives.iter().map(|n| neg_log_sigmoid(-dot(input, n))).sum::<f64>()
}

/// Analytic gradients of [`pair_loss`]: returns `(d/d input, d/d context,
/// d/d negative_k)`.
pub fn pair_gradients(input: &[f64], context: &[f64], negatives: &[&[f64]]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let mut g_input = vec![0.0; input.len()];
    let coef = sigmoid(dot(input, context)) - 1.0;
    let g_context: Vec<f64> = input.iter().map(|x| coef * x).collect();
    for (g, c) in g_input.iter_mut().zip(context) {
        *g += coef * c;
    }
    let g_negs = negatives
        .iter()
        .map(|n| {
            let coef = sigmoid(dot(input, n));
            for (g, v) in g_input.iter_mut().zip(n.iter()) {
                *g += coef * v;
            }
            input.iter().map(|x| coef * x).collect()
        })
        .collect();
    (g_input, g_context, g_negs)
}

/// Parameter storage shared by the training modes.
trait Params {
    fn get(&self, i: usize) -> f64;
    fn add(&self, i: usize, delta: f64);
}

/// Single-threaded storage.
struct LocalParams(Vec<Cell<f64>>);

impl LocalParams {
    fn new(values: Vec<f64>) -> Self {
        Self(values.into_iter().map(Cell::new).collect())
    }

    fn into_inner(self) -> Vec<f64> {
        self.0.into_iter().map(Cell::into_inner).collect()
    }
}

impl Params for LocalParams {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self.0[i].get()
    }
    #[inline]
    fn add(&self, i: usize, delta: f64) {
        self.0[i].set(self.0[i].get() + delta);
    }
}

/// Lock-free storage for asynchronous SGD: relaxed loads and stores, so
/// concurrent updates to one coordinate may be lost.
struct SharedParams(Vec<AtomicU64>);

impl Params for SharedParams {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn add(&self, i: usize, delta: f64) {
        let v = self.get(i) + delta;
        self.0[i].store(v.to_bits(), Ordering::Relaxed);
    }
}

/// One SGD step on a single pair: moves every involved vector by
/// `-lr * gradient` of [`pair_loss`]. Returns the loss before the step.
fn sgd_pair<P: Params>(
    input: &P,
    output: &P,
    dim: usize,
    center: usize,
    targets: &[(usize, bool)],
    lr: f64,
    scratch: &mut [f64],
) -> f64 {
    scratch.fill(0.0);
    let base = center * dim;
    let mut loss = 0.0;
    for &(target, positive) in targets {
        let tb = target * dim;
        let mut score = 0.0;
        for k in 0..dim {
            score += input.get(base + k) * output.get(tb + k);
        }
        // d loss / d score
        let coef = if positive {
            loss += neg_log_sigmoid(score);
            sigmoid(score) - 1.0
        } else {
            loss += neg_log_sigmoid(-score);
            sigmoid(score)
        };
        for (k, s) in scratch.iter_mut().enumerate() {
            *s += coef * output.get(tb + k);
            output.add(tb + k, -lr * coef * input.get(base + k));
        }
    }
    for (k, s) in scratch.iter().enumerate() {
        input.add(base + k, -lr * s);
    }
    loss
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub vocabulary: usize,
    pub tokens: usize,
    pub pairs: usize,
    /// Mean per-pair loss of each epoch.
    pub epoch_loss: Vec<f64>,
}

struct Vocab {
    tokens: Vec<u32>,
    counts: Vec<u64>,
    index: HashMap<u32, usize>,
}

fn build_vocab(corpus: &TrailCorpus) -> Vocab {
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for t in corpus.trails.iter().flatten() {
        *counts.entry(*t).or_default() += 1;
    }
    let mut tokens: Vec<u32> = counts.keys().copied().collect();
    tokens.sort_unstable();
    let index = tokens.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let counts = tokens.iter().map(|t| counts[t]).collect();
    Vocab { tokens, counts, index }
}

struct Trainer<'a, P: Params> {
    config: &'a SgnsConfig,
    input: &'a P,
    output: &'a P,
    sentences: &'a [Vec<usize>],
    noise: WeightedIndex<f64>,
    keep_prob: Option<Vec<f64>>,
    processed: &'a AtomicUsize,
    schedule_total: f64,
}

impl<P: Params> Trainer<'_, P> {
    fn learning_rate(&self) -> f64 {
        let done = self.processed.load(Ordering::Relaxed) as f64;
        let lr0 = self.config.learning_rate;
        (lr0 * (1.0 - done / (self.schedule_total + 1.0))).max(lr0 * 1e-4)
    }

    /// Trains on every `stride`-th sentence starting at `offset`.
    fn run(&self, rng: &mut ChaCha8Rng, offset: usize, stride: usize) -> (f64, usize) {
        let dim = self.config.dimension;
        let mut scratch = vec![0.0; dim];
        let mut targets = Vec::with_capacity(self.config.negatives + 1);
        let mut kept = Vec::new();
        let mut loss = 0.0;
        let mut pairs = 0;
        for sentence in self.sentences.iter().skip(offset).step_by(stride) {
            kept.clear();
            match &self.keep_prob {
                Some(p) => kept.extend(sentence.iter().copied().filter(|&w| rng.random::<f64>() < p[w])),
                None => kept.extend_from_slice(sentence),
            }
            let lr = self.learning_rate();
            for (pos, &center) in kept.iter().enumerate() {
                let reach = rng.random_range(1..=self.config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for (c, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if c == pos {
                        continue;
                    }
                    targets.clear();
                    targets.push((context, true));
                    for _ in 0..self.config.negatives {
                        let neg = self.noise.sample(rng);
                        if neg != context {
                            targets.push((neg, false));
                        }
                    }
                    loss += sgd_pair(self.input, self.output, dim, center, &targets, lr, &mut scratch);
                    pairs += 1;
                }
            }
            self.processed.fetch_add(sentence.len(), Ordering::Relaxed);
        }
        (loss, pairs)
    }
}

/// Trains skip-gram embeddings with negative sampling. Noise tokens are
/// drawn from the unigram distribution raised to 0.75; the learning rate
/// decays linearly over all epochs.
pub fn train_sgns(corpus: &TrailCorpus, config: &SgnsConfig) -> Result<(EmbeddingMatrix, TrainReport)> {
    config.validate()?;
    if corpus.token_count() == 0 {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let vocab = build_vocab(corpus);
    let v = vocab.tokens.len();
    if v < 2 {
        return Err(Error::InvalidInput("vocabulary needs at least 2 tokens for negative sampling".into()));
    }
    let dim = config.dimension;
    let sentences: Vec<Vec<usize>> =
        corpus.trails.iter().map(|t| t.iter().map(|tok| vocab.index[tok]).collect()).collect();
    let total_tokens = corpus.token_count();
    let noise = WeightedIndex::new(vocab.counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let keep_prob = config.subsample.map(|t| {
        vocab
            .counts
            .iter()
            .map(|&c| {
                let f = c as f64 / (t * total_tokens as f64);
                ((f.sqrt() + 1.0) / f).min(1.0)
            })
            .collect()
    });

    let mut init_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, u64::MAX, 0));
    let init: Vec<f64> = (0..v * dim).map(|_| (init_rng.random::<f64>() - 0.5) / dim as f64).collect();
    let processed = AtomicUsize::new(0);
    let schedule_total = (config.epochs * total_tokens) as f64;
    let mut report = TrainReport { vocabulary: v, tokens: total_tokens, ..Default::default() };

    let (input, output) = if config.workers == 1 {
        let input = LocalParams::new(init);
        let output = LocalParams::new(vec![0.0; v * dim]);
        let trainer = Trainer {
            config,
            input: &input,
            output: &output,
            sentences: &sentences,
            noise,
            keep_prob,
            processed: &processed,
            schedule_total,
        };
        for epoch in 0..config.epochs {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, epoch as u64, 0));
            let (loss, pairs) = trainer.run(&mut rng, 0, 1);
            report.pairs += pairs;
            report.epoch_loss.push(loss / pairs.max(1) as f64);
        }
        (input.into_inner(), output.into_inner())
    } else {
        let input = SharedParams(init.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect());
        let output = SharedParams((0..v * dim).map(|_| AtomicU64::new(0f64.to_bits())).collect());
        let trainer = Trainer {
            config,
            input: &input,
            output: &output,
            sentences: &sentences,
            noise,
            keep_prob,
            processed: &processed,
            schedule_total,
        };
        for epoch in 0..config.epochs {
            let results: Vec<(f64, usize)> = std::thread::scope(|s| {
                let handles: Vec<_> = (0..config.workers)
                    .map(|w| {
                        let trainer = &trainer;
                        s.spawn(move || {
                            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, epoch as u64, w as u64));
                            trainer.run(&mut rng, w, config.workers)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sgns worker panicked")).collect()
            });
            let loss: f64 = results.iter().map(|r| r.0).sum();
            let pairs: usize = results.iter().map(|r| r.1).sum();
            report.pairs += pairs;
            report.epoch_loss.push(loss / pairs.max(1) as f64);
        }
        let unpack = |p: SharedParams| p.0.into_iter().map(|a| f64::from_bits(a.into_inner())).collect::<Vec<_>>();
        (unpack(input), unpack(output))
    };

    let mut matrix = EmbeddingMatrix::from_flat(vocab.tokens, dim, input)?;
    matrix.context = Some(output);
    Ok((matrix, report))
}
