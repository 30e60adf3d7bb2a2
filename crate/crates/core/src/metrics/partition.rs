//! Agreement between two hard partitions of the same elements: NMI, ARI
//! and the Fowlkes-Mallows index, all from one contingency table.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

struct Contingency {
    n: usize,
    /// `(row, col, count)` for every non-empty cell.
    cells: Vec<(usize, usize, usize)>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn dense_ids<T: Copy + Eq + Hash>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let mapped = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect();
    (mapped, ids.len())
}

impl Contingency {
    fn new<A: Copy + Eq + Hash, B: Copy + Eq + Hash>(a: &[A], b: &[B]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
        }
        if a.is_empty() {
            return Err(Error::InvalidInput("empty partitions".into()));
        }
        let (a, ka) = dense_ids(a);
        let (b, kb) = dense_ids(b);
        let mut table: HashMap<(usize, usize), usize> = HashMap::new();
        let mut rows = vec![0; ka];
        let mut cols = vec![0; kb];
        for (&i, &j) in a.iter().zip(&b) {
            *table.entry((i, j)).or_default() += 1;
            rows[i] += 1;
            cols[j] += 1;
        }
        let mut cells: Vec<(usize, usize, usize)> = table.into_iter().map(|((i, j), c)| (i, j, c)).collect();
        cells.sort_unstable();
        Ok(Self { n: a.len(), cells, rows, cols })
    }

    /// Same partition up to renaming.
    fn identical(&self) -> bool {
        self.cells.len() == self.rows.len() && self.cells.len() == self.cols.len()
    }
}

fn comb2(x: usize) -> u128 {
    let x = x as u128;
    x * x.saturating_sub(1) / 2
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// `MI / sqrt(H(A) H(B))` with natural logs. Identical partitions score 1;
/// otherwise a zero entropy on either side gives 0.
pub fn nmi<A: Copy + Eq + Hash, B: Copy + Eq + Hash>(a: &[A], b: &[B]) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    if t.identical() {
        return Ok(1.0);
    }
    let ha = entropy(&t.rows, t.n);
    let hb = entropy(&t.cols, t.n);
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let n = t.n as f64;
    let mut terms: Vec<f64> = t
        .cells
        .iter()
        .map(|&(i, j, c)| {
            let c = c as f64;
            c / n * (n * c / (t.rows[i] as f64 * t.cols[j] as f64)).ln()
        })
        .collect();
    // Summing in value order makes the result independent of argument order.
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

struct PairCounts {
    together_both: u128,
    together_a: u128,
    together_b: u128,
    total: u128,
}

fn pair_counts(t: &Contingency) -> PairCounts {
    PairCounts {
        together_both: t.cells.iter().map(|&(_, _, c)| comb2(c)).sum(),
        together_a: t.rows.iter().map(|&c| comb2(c)).sum(),
        together_b: t.cols.iter().map(|&c| comb2(c)).sum(),
        total: comb2(t.n),
    }
}

/// Adjusted Rand index. When the expected and maximum index coincide
/// (both partitions trivial) the value is 1.
pub fn ari<A: Copy + Eq + Hash, B: Copy + Eq + Hash>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() < 2 {
        return Err(Error::InvalidInput("ARI needs at least 2 elements".into()));
    }
    let p = pair_counts(&Contingency::new(a, b)?);
    let index = p.together_both as f64;
    let expected = p.together_a as f64 * p.together_b as f64 / p.total as f64;
    let max = (p.together_a + p.together_b) as f64 / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// `TP / sqrt((TP + FP)(TP + FN))` over element pairs, with `a` as the
/// reference. Returns `(value, degenerate)`; degenerate inputs (no pair
/// together in one of the partitions) score 0.
pub fn fmi_checked<A: Copy + Eq + Hash, B: Copy + Eq + Hash>(a: &[A], b: &[B]) -> Result<(f64, bool)> {
    if a.len() < 2 {
        return Err(Error::InvalidInput("FMI needs at least 2 elements".into()));
    }
    let p = pair_counts(&Contingency::new(a, b)?);
    if p.together_a == 0 || p.together_b == 0 {
        return Ok((0.0, true));
    }
    let tp = p.together_both as f64;
    Ok((tp / (p.together_a as f64 * p.together_b as f64).sqrt(), false))
}

pub fn fmi<A: Copy + Eq + Hash, B: Copy + Eq + Hash>(a: &[A], b: &[B]) -> Result<f64> {
    let (v, degenerate) = fmi_checked(a, b)?;
    if degenerate {
        log::warn!("FMI undefined (no co-membership pairs); reporting 0");
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub elements: usize,
    pub nmi: f64,
    pub ari: f64,
    pub fmi: f64,
    pub fmi_degenerate: bool,
}

pub fn agreement<A: Copy + Eq + Hash, B: Copy + Eq + Hash>(a: &[A], b: &[B]) -> Result<AgreementReport> {
    let (fmi, fmi_degenerate) = fmi_checked(a, b)?;
    Ok(AgreementReport { elements: a.len(), nmi: nmi(a, b)?, ari: ari(a, b)?, fmi, fmi_degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        let a = [0, 0, 1, 1];
        let b = [0, 0, 1, 2];
        assert!((nmi(&a, &b).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((ari(&a, &b).unwrap() - 4.0 / 7.0).abs() < 1e-12);
        assert!((fmi(&a, &b).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(nmi(&a, &[0, 1, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn identical_partitions() {
        let a = [3, 3, 1, 7, 7, 7];
        let b = ['x', 'x', 'y', 'z', 'z', 'z'];
        assert_eq!(nmi(&a, &b).unwrap(), 1.0);
        assert_eq!(ari(&a, &b).unwrap(), 1.0);
        assert_eq!(fmi(&a, &b).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0], &[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert!(ari(&[0], &[0]).is_err());
        assert!(nmi::<u8, u8>(&[], &[]).is_err());
        assert!(nmi(&[0, 1], &[0]).is_err());
        let (v, flagged) = fmi_checked(&[0, 1, 2], &[0, 0, 1]).unwrap();
        assert_eq!((v, flagged), (0.0, true));
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
        (2usize..40).prop_flat_map(|n| (proptest::collection::vec(0u8..5, n), proptest::collection::vec(0u8..4, n)))
    }

    proptest! {
        #[test]
        fn symmetric_and_rename_invariant((a, b) in arb_pair()) {
            prop_assert_eq!(nmi(&a, &b).unwrap(), nmi(&b, &a).unwrap());
            prop_assert_eq!(ari(&a, &b).unwrap(), ari(&b, &a).unwrap());
            prop_assert_eq!(fmi(&a, &b).unwrap(), fmi(&b, &a).unwrap());
            let renamed: Vec<u8> = a.iter().map(|x| 200 - x).collect();
            prop_assert_eq!(nmi(&a, &b).unwrap(), nmi(&renamed, &b).unwrap());
            prop_assert_eq!(ari(&a, &b).unwrap(), ari(&renamed, &b).unwrap());
            let v = nmi(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
