use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular grid on `[0,1]^N` with `m_j` points on axis `j`, flattened
/// row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: Vec<usize>,
}

/// Default memory budget: grid points per sample.
pub const MAX_GRID_POINTS: usize = 1 << 22;

impl GridSpec {
    pub fn new(resolution: Vec<usize>) -> Result<Self> {
        let g = Self { resolution };
        g.validate()?;
        Ok(g)
    }

    pub fn uniform(m: usize, n_dims: usize) -> Result<Self> {
        Self::new(vec![m; n_dims])
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution.is_empty() {
            return Err(Error::invalid("grid needs at least one axis"));
        }
        if let Some(m) = self.resolution.iter().find(|&&m| m < 2) {
            return Err(Error::invalid(format!("grid resolution {m} < 2")));
        }
        let total = self
            .resolution
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .unwrap_or(usize::MAX);
        if total > MAX_GRID_POINTS {
            return Err(Error::Budget {
                what: "grid points",
                needed: total,
                limit: MAX_GRID_POINTS,
            });
        }
        Ok(())
    }

    pub fn n_dims(&self) -> usize {
        self.resolution.len()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / (self.resolution[axis] - 1) as f64
    }

    /// Coordinates of axis `j`: `i / (m_j - 1)`.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        let m = self.resolution[axis];
        (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n_dims()];
        let mut rest = flat;
        for (slot, &m) in idx.iter_mut().zip(&self.resolution).rev() {
            *slot = rest % m;
            rest /= m;
        }
        idx
    }

    pub fn flat(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &m)| acc * m + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.index(flat)
            .iter()
            .enumerate()
            .map(|(j, &i)| i as f64 * self.spacing(j))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Volume of one grid cell, `prod_j 1/(m_j - 1)`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.n_dims()).map(|j| self.spacing(j)).product()
    }
}
