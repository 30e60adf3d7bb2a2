//! Shepard inverse-distance-weighted interpolation onto a regular grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::write_with;

pub const DEFAULT_POWER: f64 = 2.0;
const COINCIDENT: f64 = 1e-12;

/// Grid nodes span `[x_min, x_max] x [y_min, y_max]` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Bounding box of the points, padded by `margin` of its extent.
    pub fn around(points: &[(f64, f64)], nx: usize, ny: usize, margin: f64) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if points.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let px = (x1 - x0) * margin;
        let py = (y1 - y0) * margin;
        Self { x_min: x0 - px, x_max: x1 + px, y_min: y0 - py, y_max: y1 + py, nx, ny }
    }

    fn coord(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        Self::coord(self.x_min, self.x_max, self.nx, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        Self::coord(self.y_min, self.y_max, self.ny, j)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub spec: GridSpec,
    /// Row-major by `y`, then `x`.
    pub values: Vec<f64>,
}

impl Grid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }

    /// `x \t y \t value` per node.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_with(path, |w| {
            for j in 0..self.spec.ny {
                for i in 0..self.spec.nx {
                    writeln!(w, "{}\t{}\t{}", self.spec.x(i), self.spec.y(j), self.at(i, j))?;
                }
            }
            Ok(())
        })
    }
}

fn check(samples: &[(f64, f64, f64)], power: f64) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("IDW needs at least one sample".into()));
    }
    if !(power > 0.0) {
        return Err(Error::Config("IDW power must be > 0".into()));
    }
    Ok(())
}

fn interpolate(samples: &[(f64, f64, f64)], x: f64, y: f64, power: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &(sx, sy, v) in samples {
        let d = ((x - sx).powi(2) + (y - sy).powi(2)).sqrt();
        if d < COINCIDENT {
            return v;
        }
        let w = d.powf(-power);
        num += w * v;
        den += w;
    }
    num / den
}

pub fn idw_at(samples: &[(f64, f64, f64)], x: f64, y: f64, power: f64) -> Result<f64> {
    check(samples, power)?;
    Ok(interpolate(samples, x, y, power))
}

pub fn idw_interpolate(samples: &[(f64, f64, f64)], spec: &GridSpec, power: f64) -> Result<Grid> {
    check(samples, power)?;
    if spec.nx == 0 || spec.ny == 0 {
        return Err(Error::Config("grid needs at least one node per axis".into()));
    }
    let mut values = Vec::with_capacity(spec.nx * spec.ny);
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            values.push(interpolate(samples, spec.x(i), spec.y(j), power));
        }
    }
    Ok(Grid { spec: spec.clone(), values })
}
