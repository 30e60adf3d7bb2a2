//! Label-ranking metrics over per-sample score vectors.
//!
//! Ranks are 1-based with the highest score first; tied scores share the
//! average of the positions they span.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RankedPrediction {
    pub true_labels: Vec<usize>,
    pub scores: Vec<f64>,
}

impl RankedPrediction {
    pub fn single(label: usize, scores: Vec<f64>) -> Self {
        Self { true_labels: vec![label], scores }
    }

    fn is_true(&self) -> Vec<bool> {
        let mut mask = vec![false; self.scores.len()];
        for &l in &self.true_labels {
            mask[l] = true;
        }
        mask
    }

    fn check(&self) -> Result<()> {
        if self.true_labels.is_empty() {
            return Err(Error::InvalidInput("sample without a true label".into()));
        }
        if let Some(&l) = self.true_labels.iter().find(|&&l| l >= self.scores.len()) {
            return Err(Error::InvalidInput(format!("true label {l} outside score vector")));
        }
        if self.scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidInput("NaN score".into()));
        }
        Ok(())
    }
}

/// Average rank of `score` among `others` (which include `score` itself once).
fn average_rank<'a>(score: f64, others: impl Iterator<Item = &'a f64>) -> f64 {
    let (mut above, mut tied) = (0usize, 0usize);
    for &s in others {
        if s > score {
            above += 1;
        } else if s == score {
            tied += 1;
        }
    }
    // `tied` counts the label itself.
    1.0 + above as f64 + (tied as f64 - 1.0) / 2.0
}

/// For each true label, its rank among the true labels divided by its rank
/// among all labels; averaged over true labels, then over samples.
pub fn ranking_average_precision(predictions: &[RankedPrediction]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let mut total = 0.0;
    for p in predictions {
        p.check()?;
        let true_scores: Vec<f64> = p.true_labels.iter().map(|&l| p.scores[l]).collect();
        let sample: f64 =
            true_scores.iter().map(|&s| average_rank(s, true_scores.iter()) / average_rank(s, p.scores.iter())).sum();
        total += sample / p.true_labels.len() as f64;
    }
    Ok(total / predictions.len() as f64)
}

/// Fraction of (true, false) label pairs where the false label scores at
/// least as high as the true one, averaged over samples.
pub fn ranking_loss(predictions: &[RankedPrediction]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let mut total = 0.0;
    for p in predictions {
        p.check()?;
        let mask = p.is_true();
        let mut false_scores: Vec<f64> = p.scores.iter().zip(&mask).filter(|(_, &t)| !t).map(|(&s, _)| s).collect();
        if false_scores.is_empty() {
            return Err(Error::Undefined("ranking loss needs at least one false label".into()));
        }
        false_scores.sort_by(f64::total_cmp);
        let n_true = mask.iter().filter(|&&t| t).count();
        let bad: usize = p
            .scores
            .iter()
            .zip(&mask)
            .filter(|(_, &t)| t)
            // false labels with score >= s
            .map(|(&s, _)| false_scores.len() - false_scores.partition_point(|&f| f < s))
            .sum();
        total += bad as f64 / (n_true * false_scores.len()) as f64;
    }
    Ok(total / predictions.len() as f64)
}
