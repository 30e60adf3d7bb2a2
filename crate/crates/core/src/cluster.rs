//! k-means over periodical vectors and the [`SchemeLabeling`] shape shared by
//! every classification scheme.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PeriodicalId;
use crate::error::{Error, Result};
use crate::io_util::{for_each_line, read_json, write_json, write_with};
use crate::matrices::PeriodicalMatrix;
use crate::walks::stream_seed;

pub const DEFAULT_K: usize = 26;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Convergence threshold on the total squared centroid shift, relative
    /// to the mean per-feature variance of the data.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    /// L2-normalize vectors before clustering.
    pub normalize: bool,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K, max_iters: 300, tolerance: 1e-4, restarts: 10, seed: 0, normalize: false }
    }
}

/// Point sets k-means can run on without densifying.
pub trait RowSet: Sync {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn sq_norm(&self, i: usize) -> f64;
    fn dot(&self, i: usize, dense: &[f64]) -> f64;
    /// `acc += row_i`
    fn add_to(&self, i: usize, acc: &mut [f64]);
    fn is_finite(&self) -> bool;
    fn normalized(&self) -> Self
    where
        Self: Sized;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sq_dist(&self, i: usize, centroid: &[f64], centroid_sq_norm: f64) -> f64 {
        (self.sq_norm(i) - 2.0 * self.dot(i, centroid) + centroid_sq_norm).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseRows {
    dim: usize,
    data: Vec<f64>,
}

impl DenseRows {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("rows have different lengths".into()));
        }
        Ok(Self { dim, data: rows.concat() })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

impl RowSet for DenseRows {
    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn sq_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|x| x * x).sum()
    }
    fn dot(&self, i: usize, dense: &[f64]) -> f64 {
        self.row(i).iter().zip(dense).map(|(a, b)| a * b).sum()
    }
    fn add_to(&self, i: usize, acc: &mut [f64]) {
        for (a, x) in acc.iter_mut().zip(self.row(i)) {
            *a += x;
        }
    }
    fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
    fn normalized(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_mut(self.dim.max(1)) {
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        Self { dim: self.dim, data }
    }
}

/// Selected rows of a sparse periodical matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows {
    dim: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseRows {
    pub fn from_matrix(matrix: &PeriodicalMatrix, select: &[PeriodicalId]) -> Self {
        Self { dim: matrix.dimension(), rows: select.iter().map(|&p| matrix.row(p).to_vec()).collect() }
    }
}

impl RowSet for SparseRows {
    fn len(&self) -> usize {
        self.rows.len()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn sq_norm(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, v)| v * v).sum()
    }
    fn dot(&self, i: usize, dense: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * dense[j as usize]).sum()
    }
    fn add_to(&self, i: usize, acc: &mut [f64]) {
        for &(j, v) in &self.rows[i] {
            acc[j as usize] += v;
        }
    }
    fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|(_, v)| v.is_finite())
    }
    fn normalized(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let n = row.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    row.iter().map(|&(j, v)| (j, v / n)).collect()
                } else {
                    row.clone()
                }
            })
            .collect();
        Self { dim: self.dim, rows }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KmeansResult {
    /// Cluster of each input row; ids ordered by descending cluster size.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

fn assign<R: RowSet>(points: &R, centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    let norms: Vec<f64> = centroids.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = points.sq_dist(i, centroid, norms[c]);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

fn kmeans_pp<R: RowSet>(points: &R, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let dense = |i: usize| {
        let mut v = vec![0.0; points.dim()];
        points.add_to(i, &mut v);
        v
    };
    let mut centroids = vec![dense(rng.random_range(0..n))];
    let mut closest: Vec<f64> = vec![f64::INFINITY; n];
    while centroids.len() < k {
        let last = centroids.last().unwrap();
        let last_norm: f64 = last.iter().map(|x| x * x).sum();
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(points.sq_dist(i, last, last_norm));
        }
        let total: f64 = closest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                target -= d;
                if target < 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(dense(next));
    }
    centroids
}

/// Means of the assigned points. Empty clusters are reseeded at the point
/// farthest from its own centroid.
fn update<R: RowSet>(points: &R, labels: &[usize], dists: &[f64], k: usize) -> Vec<Vec<f64>> {
    let dim = points.dim();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        points.add_to(i, &mut sums[l]);
        counts[l] += 1;
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
    let mut donors = order.into_iter();
    for c in 0..k {
        if counts[c] == 0 {
            if let Some(i) = donors.next() {
                let mut v = vec![0.0; dim];
                points.add_to(i, &mut v);
                sums[c] = v;
                counts[c] = 1;
            }
        } else {
            let n = counts[c] as f64;
            sums[c].iter_mut().for_each(|x| *x /= n);
        }
    }
    sums
}

fn mean_variance<R: RowSet>(points: &R) -> f64 {
    let n = points.len() as f64;
    let mut mean = vec![0.0; points.dim()];
    for i in 0..points.len() {
        points.add_to(i, &mut mean);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mean_sq: f64 = mean.iter().map(|m| m * m).sum();
    let total: f64 = (0..points.len()).map(|i| points.sq_dist(i, &mean, mean_sq)).sum();
    total / n / points.dim().max(1) as f64
}

fn lloyd<R: RowSet>(points: &R, config: &KmeansConfig, restart: usize, tol: f64) -> KmeansResult {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, restart as u64, 0));
    let k = config.k;
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let mut trace = Vec::new();
    let mut prev: Option<Vec<usize>> = None;
    let mut iterations = 0;
    loop {
        let (labels, dists) = assign(points, &centroids);
        trace.push(dists.iter().sum());
        let settled = prev.as_ref() == Some(&labels);
        if settled || iterations == config.max_iters {
            return KmeansResult {
                assignments: labels,
                centroids,
                inertia: *trace.last().unwrap(),
                inertia_trace: trace,
                iterations,
            };
        }
        let next = update(points, &labels, &dists, k);
        let shift: f64 =
            next.iter().zip(&centroids).map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sum();
        centroids = next;
        iterations += 1;
        prev = Some(labels);
        if shift <= tol {
            let (labels, dists) = assign(points, &centroids);
            trace.push(dists.iter().sum());
            return KmeansResult {
                assignments: labels,
                centroids,
                inertia: *trace.last().unwrap(),
                inertia_trace: trace,
                iterations,
            };
        }
    }
}

/// Renumbers clusters by descending size, ties by first occurrence.
fn relabel_by_size(result: &mut KmeansResult) {
    let k = result.centroids.len();
    let mut counts = vec![0usize; k];
    let mut first = vec![usize::MAX; k];
    for (i, &l) in result.assignments.iter().enumerate() {
        counts[l] += 1;
        first[l] = first[l].min(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(first[a].cmp(&first[b])));
    let mut new_id = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        new_id[old] = new;
    }
    result.assignments.iter_mut().for_each(|l| *l = new_id[*l]);
    result.centroids = order.iter().map(|&old| result.centroids[old].clone()).collect();
}

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` by inertia.
pub fn kmeans<R: RowSet>(points: &R, config: &KmeansConfig) -> Result<KmeansResult> {
    if config.k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if !(config.tolerance >= 0.0) {
        return Err(Error::Config("tolerance must be >= 0".into()));
    }
    if points.len() < config.k {
        return Err(Error::InvalidInput(format!("{} points cannot form {} clusters", points.len(), config.k)));
    }
    if !points.is_finite() {
        return Err(Error::InvalidInput("non-finite input vector".into()));
    }
    let normalized;
    let points = if config.normalize {
        normalized = points.normalized();
        &normalized
    } else {
        points
    };
    let tol = config.tolerance * mean_variance(points);
    let mut best: Option<KmeansResult> = None;
    for restart in 0..config.restarts.max(1) {
        let run = lloyd(points, config, restart, tol);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    relabel_by_size(&mut best);
    Ok(best)
}

/// A total labeling of a periodical universe with contiguous label ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeLabeling {
    pub name: String,
    labels: BTreeMap<PeriodicalId, u32>,
    /// Display name of each label id.
    pub label_names: Vec<String>,
}

impl SchemeLabeling {
    /// Builds a labeling from arbitrary label values, renumbering them by
    /// descending size (ties by ascending value).
    pub fn from_pairs<L: Ord + Clone + ToString>(
        name: impl Into<String>,
        pairs: impl IntoIterator<Item = (PeriodicalId, L)>,
    ) -> Self {
        let pairs: Vec<(PeriodicalId, L)> = pairs.into_iter().collect();
        let mut sizes: BTreeMap<L, usize> = BTreeMap::new();
        for (_, l) in &pairs {
            *sizes.entry(l.clone()).or_default() += 1;
        }
        let mut order: Vec<(L, usize)> = sizes.into_iter().collect();
        order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let ids: BTreeMap<L, u32> = order.iter().enumerate().map(|(i, (l, _))| (l.clone(), i as u32)).collect();
        Self {
            name: name.into(),
            labels: pairs.iter().map(|(p, l)| (*p, ids[l])).collect(),
            label_names: order.iter().map(|(l, _)| l.to_string()).collect(),
        }
    }

    pub fn from_kmeans(name: impl Into<String>, periodicals: &[PeriodicalId], result: &KmeansResult) -> Self {
        let k = result.centroids.len();
        Self {
            name: name.into(),
            labels: periodicals.iter().zip(&result.assignments).map(|(&p, &l)| (p, l as u32)).collect(),
            label_names: (0..k).map(|i| i.to_string()).collect(),
        }
    }

    pub fn label_of(&self, periodical: PeriodicalId) -> Option<u32> {
        self.labels.get(&periodical).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PeriodicalId, u32)> + '_ {
        self.labels.iter().map(|(&p, &l)| (p, l))
    }

    pub fn periodicals(&self) -> impl Iterator<Item = PeriodicalId> + '_ {
        self.labels.keys().copied()
    }

    /// Same labeling with label values permuted uniformly at random.
    pub fn shuffled(&self, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        let mut values: Vec<u32> = self.labels.values().copied().collect();
        values.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            name: format!("{}-shuffled", self.name),
            labels: self.labels.keys().copied().zip(values).collect(),
            label_names: self.label_names.clone(),
        }
    }

    /// `periodical \t label` rows plus a JSON sidecar with the label names
    /// and any extra metadata.
    pub fn write(&self, path: &Path, metadata: serde_json::Value) -> Result<()> {
        write_with(path, |w| {
            for (p, l) in self.iter() {
                writeln!(w, "{p}\t{l}")?;
            }
            Ok(())
        })?;
        write_json(
            &path.with_extension("json"),
            &serde_json::json!({
                "scheme": self.name,
                "k": self.n_labels(),
                "label_names": self.label_names,
                "metadata": metadata,
            }),
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let meta: serde_json::Value = read_json(&path.with_extension("json"))?;
        let name = meta["scheme"].as_str().unwrap_or_default().to_string();
        let label_names: Vec<String> = serde_json::from_value(meta["label_names"].clone())?;
        let mut labels = BTreeMap::new();
        for_each_line(path, |line_no, line| {
            if line.is_empty() {
                return Ok(());
            }
            let parsed = line
                .split_once('\t')
                .and_then(|(p, l)| Some((p.parse::<PeriodicalId>().ok()?, l.parse::<u32>().ok()?)));
            match parsed {
                Some((p, l)) if (l as usize) < label_names.len() => {
                    labels.insert(p, l);
                    Ok(())
                }
                _ => Err(Error::parse(path, line_no, "expected `periodical \\t label`")),
            }
        })?;
        Ok(Self { name, labels, label_names })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSize {
    pub label: u32,
    pub count: usize,
    pub fraction: f64,
}

pub fn scheme_sizes(labeling: &SchemeLabeling) -> Result<Vec<SchemeSize>> {
    if labeling.is_empty() {
        return Err(Error::InvalidInput("empty labeling".into()));
    }
    let mut counts = vec![0usize; labeling.n_labels()];
    for (_, l) in labeling.iter() {
        counts[l as usize] += 1;
    }
    let n = labeling.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(l, count)| SchemeSize { label: l as u32, count, fraction: count as f64 / n })
        .collect())
}
