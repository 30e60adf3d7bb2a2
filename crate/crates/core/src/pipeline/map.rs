//! Per-periodical similarity maps: 2-D coordinates plus an IDW heat grid.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{PeriodicalId, PeriodicalRegistry};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::io_util::{for_each_line, write_with};
use crate::metrics::idw::{idw_interpolate, GridSpec};

pub type Coordinates = BTreeMap<PeriodicalId, (f64, f64)>;

/// Projection onto the first two principal components. Each axis is
/// oriented so that its largest-magnitude loading is positive.
pub fn pca_coordinates(embeddings: &EmbeddingMatrix, periodicals: &[PeriodicalId]) -> Result<Coordinates> {
    let rows: Vec<&[f64]> = periodicals
        .iter()
        .map(|&p| embeddings.vector(p).ok_or_else(|| Error::InvalidInput(format!("periodical {p} has no embedding"))))
        .collect::<Result<_>>()?;
    let (n, d) = (rows.len(), embeddings.dim());
    if n < 2 || d < 2 {
        return Err(Error::InvalidInput("PCA needs at least 2 points in at least 2 dimensions".into()));
    }
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axis = |k: usize| {
        let mut v = eig.eigenvectors.column(order[k]).into_owned();
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.neg_mut();
        }
        v
    };
    let projected = &centered * axis(0);
    let projected_y = &centered * axis(1);
    Ok(periodicals.iter().enumerate().map(|(i, &p)| (p, (projected[i], projected_y[i]))).collect())
}

/// Reads `periodical_name \t x \t y`; unknown names are skipped and counted.
pub fn read_coordinates(path: &Path, registry: &PeriodicalRegistry) -> Result<(Coordinates, usize)> {
    let mut coords = Coordinates::new();
    let mut unknown = 0;
    for_each_line(path, |line_no, line| {
        if line.trim().is_empty() {
            return Ok(());
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = match fields[..] {
            [name, x, y] => x.trim().parse::<f64>().ok().zip(y.trim().parse::<f64>().ok()).map(|xy| (name, xy)),
            _ => None,
        };
        let Some((name, xy)) = parsed.filter(|(_, (x, y))| x.is_finite() && y.is_finite()) else {
            return Err(Error::parse(path, line_no, "expected `name \\t x \\t y`"));
        };
        match registry.lookup(name) {
            Some(id) => {
                coords.insert(id, xy);
            }
            None => unknown += 1,
        }
        Ok(())
    })?;
    Ok((coords, unknown))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub periodicals: usize,
    pub missing_coordinates: usize,
    pub grid: GridSpec,
    pub power: f64,
    pub mean_similarity: f64,
}

/// Writes `periodical \t name \t x \t y \t similarity` rows to `table` and an
/// IDW grid over their bounding box to `grid`. Periodicals without
/// coordinates are left out and counted.
pub fn export_similarity_map(
    field: &[(PeriodicalId, f64)],
    coordinates: &Coordinates,
    registry: &PeriodicalRegistry,
    (nx, ny): (usize, usize),
    power: f64,
    table: &Path,
    grid: &Path,
) -> Result<MapSummary> {
    let placed: Vec<(PeriodicalId, f64, f64, f64)> =
        field.iter().filter_map(|&(p, s)| coordinates.get(&p).map(|&(x, y)| (p, x, y, s))).collect();
    let missing = field.len() - placed.len();
    if missing > 0 {
        log::warn!("{missing} periodicals have no map coordinates and were left out");
    }
    if placed.is_empty() {
        return Err(Error::InvalidInput("no periodical in the field has coordinates".into()));
    }
    write_with(table, |w| {
        for &(p, x, y, s) in &placed {
            writeln!(w, "{p}\t{}\t{x}\t{y}\t{s}", registry.name(p).unwrap_or_default())?;
        }
        Ok(())
    })?;
    let points: Vec<(f64, f64)> = placed.iter().map(|&(_, x, y, _)| (x, y)).collect();
    let spec = GridSpec::around(&points, nx, ny, 0.05);
    let samples: Vec<(f64, f64, f64)> = placed.iter().map(|&(_, x, y, s)| (x, y, s)).collect();
    idw_interpolate(&samples, &spec, power)?.write(grid)?;
    let mean_similarity = placed.iter().map(|p| p.3).sum::<f64>() / placed.len() as f64;
    Ok(MapSummary { periodicals: placed.len(), missing_coordinates: missing, grid: spec, power, mean_similarity })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry(n: usize) -> PeriodicalRegistry {
        let mut r = PeriodicalRegistry::new();
        for i in 0..n {
            r.intern(&format!("venue {i}"));
        }
        r
    }

    #[test]
    fn pca_recovers_the_dominant_axis() {
        // Points spread along (1, 1, 0) with small noise on the third axis.
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64, 0.01 * (i % 2) as f64]).collect();
        let emb = EmbeddingMatrix::from_rows((0..6).collect(), rows).unwrap();
        let c = pca_coordinates(&emb, &[0, 1, 2, 3, 4, 5]).unwrap();
        let xs: Vec<f64> = (0..6).map(|p| c[&p].0).collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert!((xs[1] - xs[0] - 2f64.sqrt()).abs() < 1e-3);
        assert!(c.values().all(|&(_, y)| y.abs() < 0.01));
        assert!(pca_coordinates(&emb, &[0]).is_err());
    }

    #[test]
    fn two_point_field_matches_idw() {
        let dir = tempfile::tempdir().unwrap();
        let coords: Coordinates = [(0, (0.0, 0.0)), (1, (3.0, 0.0))].into_iter().collect();
        let (table, grid) = (dir.path().join("map.tsv"), dir.path().join("grid.tsv"));
        let field = [(0, 0.0), (1, 1.0), (2, 0.5)];
        let s = export_similarity_map(&field, &coords, &registry(3), (4, 1), 2.0, &table, &grid).unwrap();
        assert_eq!((s.periodicals, s.missing_coordinates), (2, 1));
        let text = std::fs::read_to_string(&table).unwrap();
        assert_eq!(text, "0\tvenue 0\t0\t0\t0\n1\tvenue 1\t3\t0\t1\n");
        // The padded grid spans [-0.15, 3.15]; check one node against the formula.
        let first = std::fs::read_to_string(&grid).unwrap();
        let cols: Vec<f64> = first.lines().nth(1).unwrap().split('\t').map(|v| v.parse().unwrap()).collect();
        let (d0, d1) = (cols[0].abs(), (3.0 - cols[0]).abs());
        let expected = (1.0 / (d1 * d1)) / (1.0 / (d0 * d0) + 1.0 / (d1 * d1));
        assert!((cols[2] - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_field_gives_constant_grid() {
        let dir = tempfile::tempdir().unwrap();
        let coords: Coordinates = [(0, (0.0, 1.0)), (1, (2.0, 5.0)), (2, (-1.0, 0.5))].into_iter().collect();
        let grid = dir.path().join("grid.tsv");
        let field = [(0, 0.7), (1, 0.7), (2, 0.7)];
        export_similarity_map(&field, &coords, &registry(3), (5, 5), 2.0, &dir.path().join("t.tsv"), &grid).unwrap();
        for line in std::fs::read_to_string(&grid).unwrap().lines() {
            let v: f64 = line.rsplit('\t').next().unwrap().parse().unwrap();
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn coordinate_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coords.tsv");
        std::fs::write(&path, "Venue 1\t1.5\t-2\nnowhere\t0\t0\n").unwrap();
        let (c, unknown) = read_coordinates(&path, &registry(2)).unwrap();
        assert_eq!(c[&1], (1.5, -2.0));
        assert_eq!(unknown, 1);
        std::fs::write(&path, "venue 0\tx\t0\n").unwrap();
        assert!(read_coordinates(&path, &registry(2)).is_err());
    }
}
