//! Hashed bag-of-words features and Complement Naive Bayes, evaluated with
//! stratified k-fold cross-validation.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::write_with;
use crate::metrics::{
    macro_average, pr_roc_curves, prf_scores, ranking_average_precision, ranking_loss, RankedPrediction,
};

pub const DEFAULT_HASH_DIM: usize = 1 << 20;
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_ALPHA: f64 = 1.0;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

/// Feature index of one token in a space of `m` buckets.
pub fn hash_index(token: &str, m: usize) -> u32 {
    (fnv1a64(token.as_bytes()) % m as u64) as u32
}

/// Sparse raw term counts, sorted by index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HashedVector {
    pub dim: usize,
    pub entries: Vec<(u32, u32)>,
}

impl HashedVector {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: u32) -> u32 {
        self.entries.binary_search_by_key(&index, |e| e.0).map_or(0, |i| self.entries[i].1)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| u64::from(e.1)).sum()
    }
}

pub fn hash_vectorize(text: &str, m: usize) -> Result<HashedVector> {
    if m < 2 || m as u64 > u64::from(u32::MAX) + 1 {
        return Err(Error::Config(format!("hash dimension must lie in [2, 2^32], got {m}")));
    }
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for token in tokenize(text) {
        *counts.entry(hash_index(&token, m)).or_default() += 1;
    }
    Ok(HashedVector { dim: m, entries: counts.into_iter().collect() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnbModel {
    pub dim: usize,
    pub alpha: f64,
    pub log_prior: Vec<f64>,
    /// Observed feature index to column of `log_complement`.
    pub features: HashMap<u32, usize>,
    /// `log P(x_i | not y)` per class, over observed features only.
    pub log_complement: Vec<Vec<f64>>,
    /// Classes with no training documents; their prior is add-one smoothed.
    pub missing_classes: Vec<usize>,
    /// Only one class (or none outside it) was present in training.
    pub degenerate: bool,
    pub weight_normalized: bool,
}

impl CnbModel {
    pub fn n_classes(&self) -> usize {
        self.log_prior.len()
    }

    /// Rescales each class's log-likelihood row to unit L1 norm.
    pub fn into_weight_normalized(mut self) -> Self {
        for row in &mut self.log_complement {
            let norm: f64 = row.iter().map(|v| v.abs()).sum();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        self.weight_normalized = true;
        self
    }
}

fn fit_counts(vectors: &[&HashedVector], labels: &[usize], n_classes: usize, alpha: f64) -> Result<CnbModel> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("smoothing must be > 0, got {alpha}")));
    }
    if vectors.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: vectors.len(), actual: labels.len() });
    }
    if vectors.is_empty() {
        return Err(Error::InvalidInput("no training documents".into()));
    }
    let dim = vectors[0].dim;
    if let Some(v) = vectors.iter().find(|v| v.dim != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: v.dim });
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidInput(format!("label {l} outside {n_classes} classes")));
    }

    let mut features: HashMap<u32, usize> = HashMap::new();
    let mut sorted: Vec<u32> = vectors.iter().flat_map(|v| v.entries.iter().map(|e| e.0)).collect();
    sorted.sort_unstable();
    sorted.dedup();
    for (col, &idx) in sorted.iter().enumerate() {
        features.insert(idx, col);
    }
    let m_eff = sorted.len();

    let mut class_counts = vec![vec![0u64; m_eff]; n_classes];
    let mut docs = vec![0usize; n_classes];
    for (v, &y) in vectors.iter().zip(labels) {
        docs[y] += 1;
        for &(idx, c) in &v.entries {
            class_counts[y][features[&idx]] += u64::from(c);
        }
    }
    let feature_totals: Vec<u64> = (0..m_eff).map(|f| class_counts.iter().map(|row| row[f]).sum()).collect();
    let grand_total: u64 = feature_totals.iter().sum();

    let missing_classes: Vec<usize> = (0..n_classes).filter(|&c| docs[c] == 0).collect();
    let present = n_classes - missing_classes.len();
    let n = vectors.len() as f64;
    let log_prior = if missing_classes.is_empty() {
        docs.iter().map(|&d| (d as f64 / n).ln()).collect()
    } else {
        docs.iter().map(|&d| ((d as f64 + 1.0) / (n + n_classes as f64)).ln()).collect()
    };

    let log_complement = class_counts
        .iter()
        .map(|row| {
            let class_total: u64 = row.iter().sum();
            let denom = (grand_total - class_total) as f64 + alpha * m_eff as f64;
            row.iter().zip(&feature_totals).map(|(&c, &t)| (((t - c) as f64 + alpha) / denom).ln()).collect()
        })
        .collect();
    Ok(CnbModel {
        dim,
        alpha,
        log_prior,
        features,
        log_complement,
        missing_classes,
        degenerate: present < 2,
        weight_normalized: false,
    })
}

/// Multi-class fit; needs at least two classes among `labels`.
pub fn cnb_fit(vectors: &[HashedVector], labels: &[usize], n_classes: usize, alpha: f64) -> Result<CnbModel> {
    let refs: Vec<&HashedVector> = vectors.iter().collect();
    let model = fit_counts(&refs, labels, n_classes, alpha)?;
    if model.degenerate {
        return Err(Error::InvalidInput("multi-class fit needs at least two classes".into()));
    }
    Ok(model)
}

/// Two-class fit (class 1 = positive). A single-class input yields a model
/// flagged as degenerate instead of an error.
pub fn cnb_fit_binary(vectors: &[HashedVector], positive: &[bool], alpha: f64) -> Result<CnbModel> {
    let refs: Vec<&HashedVector> = vectors.iter().collect();
    let labels: Vec<usize> = positive.iter().map(|&p| usize::from(p)).collect();
    fit_counts(&refs, &labels, 2, alpha)
}

/// `log P(y) - sum_i x_i log P(x_i | not y)` for every class; features not
/// seen in training are ignored.
pub fn cnb_scores(model: &CnbModel, vector: &HashedVector) -> Result<Vec<f64>> {
    if vector.dim != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, actual: vector.dim });
    }
    let mut scores = model.log_prior.clone();
    for &(idx, count) in &vector.entries {
        if let Some(&col) = model.features.get(&idx) {
            for (s, row) in scores.iter_mut().zip(&model.log_complement) {
                *s -= f64::from(count) * row[col];
            }
        }
    }
    Ok(scores)
}

/// Index of the largest score, smallest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn cnb_predict(model: &CnbModel, vector: &HashedVector) -> Result<(usize, Vec<f64>)> {
    let scores = cnb_scores(model, vector)?;
    Ok((argmax(&scores), scores))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: usize,
    pub fold_of: Vec<usize>,
    pub stratified: bool,
}

impl FoldPlan {
    /// Shuffles each class, then deals its members round-robin across folds,
    /// continuing where the previous class stopped so fold sizes stay even.
    pub fn stratified(labels: &[usize], folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
        }
        if labels.len() < folds {
            return Err(Error::InvalidInput(format!("{} samples cannot fill {folds} folds", labels.len())));
        }
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fold_of = vec![0; labels.len()];
        let mut next = 0;
        for members in by_class.values_mut() {
            members.shuffle(&mut rng);
            for &i in members.iter() {
                fold_of[i] = next;
                next = (next + 1) % folds;
            }
        }
        Ok(Self { folds, fold_of, stratified: true })
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub hash_dim: usize,
    pub alpha: f64,
    pub folds: usize,
    pub weight_normalized: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hash_dim: DEFAULT_HASH_DIM,
            alpha: DEFAULT_ALPHA,
            folds: DEFAULT_FOLDS,
            weight_normalized: false,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hash_dim < 2 {
            return Err(Error::Config("hash_dim must be >= 2".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be > 0".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub train: usize,
    pub test: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub ranking_average_precision: f64,
    pub ranking_loss: f64,
    /// Classes without training documents in this fold.
    pub missing_classes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: MeanStd,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub macro_f1: MeanStd,
    pub weighted_f1: MeanStd,
    pub ranking_average_precision: MeanStd,
    pub ranking_loss: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub samples: usize,
    pub classes: usize,
    pub folds: Vec<FoldMetrics>,
    pub aggregate: Aggregate,
    pub flagged_folds: Vec<usize>,
    /// Out-of-fold predicted label per sample.
    #[serde(skip)]
    pub predicted: Vec<usize>,
    /// Out-of-fold class scores per sample.
    #[serde(skip)]
    pub scores: Vec<Vec<f64>>,
}

fn check_inputs(vectors: &[HashedVector], labels: &[usize], n_classes: usize, config: &ClassifierConfig) -> Result<()> {
    config.validate()?;
    if vectors.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: vectors.len(), actual: labels.len() });
    }
    if n_classes < 2 {
        return Err(Error::InvalidInput("classification needs at least two classes".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidInput(format!("label {l} outside {n_classes} classes")));
    }
    Ok(())
}

fn fit_fold(
    vectors: &[HashedVector],
    labels: &[usize],
    train: &[usize],
    n_classes: usize,
    config: &ClassifierConfig,
) -> Result<CnbModel> {
    let x: Vec<&HashedVector> = train.iter().map(|&i| &vectors[i]).collect();
    let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let model = fit_counts(&x, &y, n_classes, config.alpha)?;
    Ok(if config.weight_normalized { model.into_weight_normalized() } else { model })
}

/// Stratified k-fold evaluation of a multi-class CNB.
pub fn crossval_multiclass(
    vectors: &[HashedVector],
    labels: &[usize],
    n_classes: usize,
    config: &ClassifierConfig,
) -> Result<EvaluationReport> {
    check_inputs(vectors, labels, n_classes, config)?;
    let plan = FoldPlan::stratified(labels, config.folds, config.seed)?;
    let outcomes: Vec<(FoldMetrics, Vec<(usize, usize, Vec<f64>)>)> = (0..plan.folds)
        .into_par_iter()
        .map(|fold| {
            let train = plan.train_indices(fold);
            let test = plan.test_indices(fold);
            let model = fit_fold(vectors, labels, &train, n_classes, config)?;
            if !model.missing_classes.is_empty() {
                log::warn!("fold {fold}: classes {:?} absent from training", model.missing_classes);
            }
            let mut rows = Vec::with_capacity(test.len());
            for &i in &test {
                let (pred, scores) = cnb_predict(&model, &vectors[i])?;
                rows.push((i, pred, scores));
            }
            let y_true: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            let y_pred: Vec<usize> = rows.iter().map(|r| r.1).collect();
            let prf = prf_scores(&y_true, &y_pred)?;
            let ranked: Vec<RankedPrediction> =
                rows.iter().map(|r| RankedPrediction::single(labels[r.0], r.2.clone())).collect();
            let metrics = FoldMetrics {
                fold,
                train: train.len(),
                test: test.len(),
                accuracy: prf.accuracy,
                macro_precision: prf.macro_avg.precision,
                macro_recall: prf.macro_avg.recall,
                macro_f1: prf.macro_avg.f1,
                weighted_f1: prf.weighted_avg.f1,
                ranking_average_precision: ranking_average_precision(&ranked)?,
                ranking_loss: ranking_loss(&ranked)?,
                missing_classes: model.missing_classes,
            };
            Ok((metrics, rows))
        })
        .collect::<Result<_>>()?;

    let mut predicted = vec![0; labels.len()];
    let mut scores = vec![Vec::new(); labels.len()];
    let mut folds = Vec::with_capacity(outcomes.len());
    for (metrics, rows) in outcomes {
        for (i, pred, s) in rows {
            predicted[i] = pred;
            scores[i] = s;
        }
        folds.push(metrics);
    }
    let collect = |f: fn(&FoldMetrics) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
    let aggregate = Aggregate {
        accuracy: collect(|m| m.accuracy),
        macro_precision: collect(|m| m.macro_precision),
        macro_recall: collect(|m| m.macro_recall),
        macro_f1: collect(|m| m.macro_f1),
        weighted_f1: collect(|m| m.weighted_f1),
        ranking_average_precision: collect(|m| m.ranking_average_precision),
        ranking_loss: collect(|m| m.ranking_loss),
    };
    let flagged_folds = folds.iter().filter(|m| !m.missing_classes.is_empty()).map(|m| m.fold).collect();
    Ok(EvaluationReport {
        samples: labels.len(),
        classes: n_classes,
        folds,
        aggregate,
        flagged_folds,
        predicted,
        scores,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvrClass {
    pub class: usize,
    pub positives: usize,
    /// Folds whose training split had no positives for this class.
    pub skipped_folds: Vec<usize>,
    pub average_precision: Option<f64>,
    pub auc: Option<f64>,
    /// Pooled out-of-fold positive-class scores; NaN where the fold was skipped.
    #[serde(skip)]
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvrReport {
    pub classes: Vec<OvrClass>,
    pub macro_average_precision: Option<f64>,
    pub macro_auc: Option<f64>,
}

/// One binary CNB per class. Positive-class scores are the log-odds
/// `score(k) - score(rest)`, pooled across folds before building curves.
pub fn one_vs_rest(
    vectors: &[HashedVector],
    labels: &[usize],
    n_classes: usize,
    config: &ClassifierConfig,
) -> Result<OvrReport> {
    check_inputs(vectors, labels, n_classes, config)?;
    let plan = FoldPlan::stratified(labels, config.folds, config.seed)?;
    let classes: Vec<OvrClass> = (0..n_classes)
        .into_par_iter()
        .map(|k| {
            let positive: Vec<usize> = labels.iter().map(|&l| usize::from(l == k)).collect();
            let mut scores = vec![f64::NAN; labels.len()];
            let mut skipped_folds = Vec::new();
            for fold in 0..plan.folds {
                let train = plan.train_indices(fold);
                if !train.iter().any(|&i| positive[i] == 1) {
                    log::info!("class {k}: no positives in training fold {fold}, skipped");
                    skipped_folds.push(fold);
                    continue;
                }
                let model = fit_fold(vectors, &positive, &train, 2, config)?;
                for i in plan.test_indices(fold) {
                    let s = cnb_scores(&model, &vectors[i])?;
                    scores[i] = s[1] - s[0];
                }
            }
            let kept: Vec<usize> = (0..labels.len()).filter(|&i| !scores[i].is_nan()).collect();
            let s: Vec<f64> = kept.iter().map(|&i| scores[i]).collect();
            let p: Vec<bool> = kept.iter().map(|&i| positive[i] == 1).collect();
            let (average_precision, auc) = match pr_roc_curves(&s, &p) {
                Ok(c) => (Some(c.average_precision), Some(c.auc)),
                Err(Error::Undefined(_)) => (None, None),
                Err(e) => return Err(e),
            };
            Ok(OvrClass { class: k, positives: positive.iter().sum(), skipped_folds, average_precision, auc, scores })
        })
        .collect::<Result<_>>()?;
    let aps: Vec<f64> = classes.iter().filter_map(|c| c.average_precision).collect();
    let aucs: Vec<f64> = classes.iter().filter_map(|c| c.auc).collect();
    Ok(OvrReport { macro_average_precision: macro_average(&aps).ok(), macro_auc: macro_average(&aucs).ok(), classes })
}

/// `sample_id \t true_label \t score_0,score_1,...`
pub fn write_score_dump(path: &Path, sample_ids: &[String], labels: &[usize], scores: &[Vec<f64>]) -> Result<()> {
    if sample_ids.len() != labels.len() || labels.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: sample_ids.len(), actual: scores.len() });
    }
    write_with(path, |w| {
        for ((id, l), s) in sample_ids.iter().zip(labels).zip(scores) {
            let joined: Vec<String> = s.iter().map(f64::to_string).collect();
            writeln!(w, "{id}\t{l}\t{}", joined.join(","))?;
        }
        Ok(())
    })
}
