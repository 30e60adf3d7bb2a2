//! Per-class precision, recall and F1 with macro and support-weighted means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    /// Class ids covered, i.e. every label seen in either input.
    pub classes: Vec<usize>,
    pub per_class: Vec<ClassScores>,
    pub support: Vec<usize>,
    pub macro_avg: ClassScores,
    pub weighted_avg: ClassScores,
    pub accuracy: f64,
    /// Classes that were never predicted; their precision is reported as 0.
    pub never_predicted: Vec<usize>,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn prf_scores(y_true: &[usize], y_pred: &[usize]) -> Result<PrfReport> {
    if y_true.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch { expected: y_true.len(), actual: y_pred.len() });
    }
    let n_labels = y_true.iter().chain(y_pred).max().map_or(0, |&m| m + 1);
    let mut tp = vec![0usize; n_labels];
    let mut support = vec![0usize; n_labels];
    let mut predicted = vec![0usize; n_labels];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        support[t] += 1;
        predicted[p] += 1;
        if t == p {
            tp[t] += 1;
        }
    }
    let classes: Vec<usize> = (0..n_labels).filter(|&c| support[c] > 0 || predicted[c] > 0).collect();
    let mut never_predicted = Vec::new();
    let per_class: Vec<ClassScores> = classes
        .iter()
        .map(|&c| {
            let precision = if predicted[c] > 0 {
                tp[c] as f64 / predicted[c] as f64
            } else {
                never_predicted.push(c);
                0.0
            };
            let recall = if support[c] > 0 { tp[c] as f64 / support[c] as f64 } else { 0.0 };
            ClassScores { precision, recall, f1: f1(precision, recall) }
        })
        .collect();
    let k = classes.len() as f64;
    let n = y_true.len() as f64;
    let mut macro_avg = ClassScores::default();
    let mut weighted_avg = ClassScores::default();
    for (s, &c) in per_class.iter().zip(&classes) {
        let w = support[c] as f64 / n;
        macro_avg.precision += s.precision / k;
        macro_avg.recall += s.recall / k;
        macro_avg.f1 += s.f1 / k;
        weighted_avg.precision += s.precision * w;
        weighted_avg.recall += s.recall * w;
        weighted_avg.f1 += s.f1 * w;
    }
    Ok(PrfReport {
        support: classes.iter().map(|&c| support[c]).collect(),
        classes,
        per_class,
        macro_avg,
        weighted_avg,
        accuracy: tp.iter().sum::<usize>() as f64 / n,
        never_predicted,
    })
}
