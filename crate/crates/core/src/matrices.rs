//! Periodical-by-periodical citation and co-citation matrices.
//!
//! Matrices are stored as sorted sparse rows. Counts are accumulated by
//! sorting `(row, col)` keys and counting runs, so the result does not
//! depend on edge order or on how the work was split across threads.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CitationGraph, PeriodicalId};
use crate::error::{Error, Result};
use crate::io_util::{for_each_line, read_json, write_json, write_with};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Citation,
    CoCitation,
    RowNormalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicalMatrix {
    kind: MatrixKind,
    rows: Vec<Vec<(PeriodicalId, f64)>>,
    zero_rows: Vec<PeriodicalId>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dimension: usize,
    kind: MatrixKind,
    zero_rows: Vec<PeriodicalId>,
}

/// Collapses sorted `(row, col)` keys into counted sparse rows.
fn count_runs(keys: &[(PeriodicalId, PeriodicalId)], dimension: usize) -> Vec<Vec<(PeriodicalId, f64)>> {
    let mut rows = vec![Vec::new(); dimension];
    let mut iter = keys.iter().peekable();
    while let Some(&(i, j)) = iter.next() {
        let mut count = 1u64;
        while iter.peek() == Some(&&(i, j)) {
            iter.next();
            count += 1;
        }
        rows[i as usize].push((j, count as f64));
    }
    rows
}

impl PeriodicalMatrix {
    pub fn dimension(&self) -> usize {
        self.rows.len()
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn row(&self, i: PeriodicalId) -> &[(PeriodicalId, f64)] {
        &self.rows[i as usize]
    }

    pub fn get(&self, i: PeriodicalId, j: PeriodicalId) -> f64 {
        let row = self.row(i);
        row.binary_search_by_key(&j, |&(c, _)| c).map_or(0.0, |pos| row[pos].1)
    }

    pub fn dense_row(&self, i: PeriodicalId) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        for &(j, v) in self.row(i) {
            out[j as usize] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().flatten().map(|&(_, v)| v).sum()
    }

    /// Rows that were all-zero when normalized (empty for count matrices).
    pub fn zero_rows(&self) -> &[PeriodicalId] {
        &self.zero_rows
    }

    pub fn row_sum(&self, i: PeriodicalId) -> f64 {
        self.row(i).iter().map(|&(_, v)| v).sum()
    }

    /// Builds a matrix from explicit sparse rows; entries are sorted and
    /// zeros dropped.
    pub fn from_rows(kind: MatrixKind, mut rows: Vec<Vec<(PeriodicalId, f64)>>) -> Result<Self> {
        let dim = rows.len();
        for row in &mut rows {
            row.retain(|&(_, v)| v != 0.0);
            row.sort_by_key(|&(c, _)| c);
            if row.iter().any(|&(c, v)| c as usize >= dim || !v.is_finite() || v < 0.0) {
                return Err(Error::InvalidInput("matrix entry out of range or negative".into()));
            }
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidInput("duplicate matrix entry".into()));
            }
        }
        Ok(Self { kind, rows, zero_rows: Vec::new() })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_with(path, |w| {
            for (i, row) in self.rows.iter().enumerate() {
                for &(j, v) in row {
                    writeln!(w, "{i}\t{j}\t{v}")?;
                }
            }
            Ok(())
        })?;
        write_json(
            &sidecar_path(path),
            &Sidecar { dimension: self.dimension(), kind: self.kind, zero_rows: self.zero_rows.clone() },
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let meta: Sidecar = read_json(&sidecar_path(path))?;
        let mut rows = vec![Vec::new(); meta.dimension];
        for_each_line(path, |line_no, line| {
            if line.is_empty() {
                return Ok(());
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let parsed = (parts.len() == 3)
                .then(|| {
                    Some((
                        parts[0].parse::<usize>().ok()?,
                        parts[1].parse::<PeriodicalId>().ok()?,
                        parts[2].parse::<f64>().ok()?,
                    ))
                })
                .flatten();
            let Some((i, j, v)) = parsed else {
                return Err(Error::parse(path, line_no, "expected `i \\t j \\t value`"));
            };
            if i >= meta.dimension {
                return Err(Error::parse(path, line_no, "row index out of range"));
            }
            rows[i].push((j, v));
            Ok(())
        })?;
        let mut m = Self::from_rows(meta.kind, rows)?;
        m.zero_rows = meta.zero_rows;
        Ok(m)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

/// `E[i][j]` counts paper-level references from periodical `i` to
/// periodical `j`, diagonal included.
pub fn build_citation_matrix(graph: &CitationGraph) -> PeriodicalMatrix {
    let mut keys: Vec<(PeriodicalId, PeriodicalId)> = (0..graph.paper_count() as u32)
        .into_par_iter()
        .flat_map_iter(|p| {
            let src = graph.periodical_of(p);
            graph.references(p).iter().map(move |&q| (src, graph.periodical_of(q)))
        })
        .collect();
    keys.par_sort_unstable();
    PeriodicalMatrix {
        kind: MatrixKind::Citation,
        rows: count_runs(&keys, graph.periodical_count()),
        zero_rows: Vec::new(),
    }
}

/// For every citing paper, each unordered pair of distinct periodicals among
/// its references adds one to both `E[i][j]` and `E[j][i]`. The diagonal
/// stays zero.
pub fn build_cocitation_matrix(graph: &CitationGraph) -> PeriodicalMatrix {
    let mut keys: Vec<(PeriodicalId, PeriodicalId)> = (0..graph.paper_count() as u32)
        .into_par_iter()
        .flat_map_iter(|p| {
            let mut venues: Vec<PeriodicalId> = graph.references(p).iter().map(|&q| graph.periodical_of(q)).collect();
            venues.sort_unstable();
            venues.dedup();
            let mut pairs = Vec::with_capacity(venues.len() * venues.len().saturating_sub(1));
            for (a, &i) in venues.iter().enumerate() {
                for &j in &venues[a + 1..] {
                    pairs.push((i, j));
                    pairs.push((j, i));
                }
            }
            pairs
        })
        .collect();
    keys.par_sort_unstable();
    PeriodicalMatrix {
        kind: MatrixKind::CoCitation,
        rows: count_runs(&keys, graph.periodical_count()),
        zero_rows: Vec::new(),
    }
}

/// Divides each non-empty row by its sum. All-zero rows stay zero and are
/// listed in [`PeriodicalMatrix::zero_rows`].
pub fn row_normalize(matrix: &PeriodicalMatrix) -> PeriodicalMatrix {
    let mut zero_rows = Vec::new();
    let rows = matrix
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let sum: f64 = row.iter().map(|&(_, v)| v).sum();
            if sum > 0.0 {
                row.iter().map(|&(j, v)| (j, v / sum)).collect()
            } else {
                zero_rows.push(i as PeriodicalId);
                Vec::new()
            }
        })
        .collect();
    PeriodicalMatrix { kind: MatrixKind::RowNormalized, rows, zero_rows }
}
