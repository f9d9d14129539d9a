use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral_model::SpectralModel;

use super::grid::GridSpec;

/// `R(s, t)` for every pair of `points`.
pub fn covariance_matrix(model: &SpectralModel, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    for (i, p) in points.iter().enumerate() {
        if points[..i].contains(p) {
            return Err(Error::invalid(format!("duplicate point {p:?}")));
        }
    }
    let var: Vec<f64> = points
        .par_iter()
        .map(|p| model.variogram(p))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..i)
                .map(|j| {
                    let lag: Vec<f64> = points[i].iter().zip(&points[j]).map(|(a, b)| a - b).collect();
                    Ok(0.5 * (var[i] + var[j] - model.variogram(&lag)?))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = var[i];
        for (j, v) in rows[i].iter().enumerate() {
            k[(i, j)] = *v;
            k[(j, i)] = *v;
        }
    }
    Ok(k)
}

/// Variogram tabulated on all index differences of a grid. Differences and
/// their negatives share one entry.
pub(crate) struct LagTable {
    extent: Vec<usize>,
    values: Vec<f64>,
}

impl LagTable {
    pub fn build<V>(grid: &GridSpec, variogram: V) -> Result<Self>
    where
        V: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let extent: Vec<usize> = grid.resolution.iter().map(|m| 2 * m - 1).collect();
        let total: usize = extent.iter().product();
        let n = grid.n_dims();
        let diff = |flat: usize| -> Vec<i64> {
            let mut rest = flat;
            let mut d = vec![0i64; n];
            for j in (0..n).rev() {
                d[j] = (rest % extent[j]) as i64 - (grid.resolution[j] as i64 - 1);
                rest /= extent[j];
            }
            d
        };
        let canonical = |d: &[i64]| d.iter().find(|&&x| x != 0).map_or(true, |&x| x > 0);
        let mut values: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let d = diff(flat);
                if !canonical(&d) {
                    return Ok(f64::NAN);
                }
                let lag: Vec<f64> = d.iter().enumerate().map(|(j, &k)| k as f64 * grid.spacing(j)).collect();
                variogram(&lag)
            })
            .collect::<Result<_>>()?;
        // the mirrored half of the table: flat index of -d is total - 1 - flat
        for flat in 0..total {
            if values[flat].is_nan() {
                values[flat] = values[total - 1 - flat];
            }
        }
        Ok(Self { extent, values })
    }

    pub fn get(&self, grid: &GridSpec, a: &[usize], b: &[usize]) -> f64 {
        let mut flat = 0;
        for j in 0..a.len() {
            let d = a[j] as i64 - b[j] as i64 + grid.resolution[j] as i64 - 1;
            flat = flat * self.extent[j] + d as usize;
        }
        self.values[flat]
    }
}

/// Covariance of the grid points other than the origin (flat index 0).
pub(crate) fn grid_covariance<V>(grid: &GridSpec, variogram: V) -> Result<DMatrix<f64>>
where
    V: Fn(&[f64]) -> Result<f64> + Sync,
{
    let table = LagTable::build(grid, variogram)?;
    let idx: Vec<Vec<usize>> = (0..grid.len()).map(|k| grid.index(k)).collect();
    let n = grid.len() - 1;
    let origin = &idx[0];
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let vi = table.get(grid, &idx[i + 1], origin);
        for j in 0..=i {
            let vj = table.get(grid, &idx[j + 1], origin);
            let c = 0.5 * (vi + vj - table.get(grid, &idx[i + 1], &idx[j + 1]));
            k[(i, j)] = c;
            k[(j, i)] = c;
        }
    }
    Ok(k)
}
