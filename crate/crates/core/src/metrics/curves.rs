//! Precision-recall and ROC curves for binary scores.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::write_with;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryCurves {
    /// One point per distinct score, highest threshold first.
    pub pr: Vec<PrPoint>,
    /// Starts at `(0, 0)` with an infinite threshold.
    pub roc: Vec<RocPoint>,
    /// `sum_n (R_n - R_{n-1}) P_n` over the PR points.
    pub average_precision: f64,
    /// Trapezoidal area under the ROC points.
    pub auc: f64,
}

impl BinaryCurves {
    pub fn write_pr(&self, path: &Path) -> Result<()> {
        write_with(path, |w| {
            for p in &self.pr {
                writeln!(w, "{}\t{}\t{}", p.threshold, p.precision, p.recall)?;
            }
            Ok(())
        })
    }

    pub fn write_roc(&self, path: &Path) -> Result<()> {
        write_with(path, |w| {
            for p in &self.roc {
                writeln!(w, "{}\t{}\t{}", p.threshold, p.fpr, p.tpr)?;
            }
            Ok(())
        })
    }
}

/// Sweeps every distinct score as a threshold (`score >= t` is positive).
pub fn pr_roc_curves(scores: &[f64], positive: &[bool]) -> Result<BinaryCurves> {
    if scores.len() != positive.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), actual: positive.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("curves need both positive and negative samples".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut pr = Vec::new();
    let mut roc = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        pr.push(PrPoint { threshold, precision: tp as f64 / (tp + fp) as f64, recall: tp as f64 / n_pos as f64 });
        roc.push(RocPoint { threshold, fpr: fp as f64 / n_neg as f64, tpr: tp as f64 / n_pos as f64 });
    }
    let mut average_precision = 0.0;
    let mut prev_recall = 0.0;
    for p in &pr {
        average_precision += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    let auc = roc.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
    Ok(BinaryCurves { pr, roc, average_precision, auc })
}

/// Unweighted mean over classes.
pub fn macro_average(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("nothing to average".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
