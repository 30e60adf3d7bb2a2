//! Per-element similarity between two hard partitions.
//!
//! Each partition induces, for element `i`, an affinity distribution
//! `p(i, j) = alpha * [j in C(i)] / |C(i)| + (1 - alpha) * [i = j]`. The
//! similarity of `i` is `1 - (1 / (2 alpha)) * sum_j |p_A(i, j) - p_B(i, j)|`.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementSimilarityField {
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl ElementSimilarityField {
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn sizes<T: Copy + Eq + Hash>(labels: &[T]) -> HashMap<T, usize> {
    let mut out = HashMap::new();
    for &l in labels {
        *out.entry(l).or_default() += 1;
    }
    out
}

pub fn element_centric_similarity<A, B>(a: &[A], b: &[B], alpha: f64) -> Result<ElementSimilarityField>
where
    A: Copy + Eq + Hash,
    B: Copy + Eq + Hash,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let size_a = sizes(a);
    let size_b = sizes(b);
    let mut overlap: HashMap<(A, B), usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *overlap.entry((x, y)).or_default() += 1;
    }
    // The self-loop term `1 - alpha` cancels between the two distributions.
    // Shared members (including i) differ by |alpha/|A| - alpha/|B||; members
    // of only one cluster contribute that cluster's full weight.
    let values = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let na = size_a[&x] as f64;
            let nb = size_b[&y] as f64;
            let shared = overlap[&(x, y)] as f64;
            let l1 = alpha * (shared * (1.0 / na - 1.0 / nb).abs() + (na - shared) / na + (nb - shared) / nb);
            (1.0 - l1 / (2.0 * alpha)).clamp(0.0, 1.0)
        })
        .collect();
    Ok(ElementSimilarityField { values, alpha })
}
