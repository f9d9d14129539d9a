use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Jitter levels `eps`, added as `eps * trace / n` on the diagonal.
pub const JITTER_LEVELS: [f64; 7] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor of `k + eps * trace/n * I` for the smallest jitter level
/// that succeeds. Returns the factor and the jitter level used.
pub fn jittered_cholesky(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let scale = k.trace() / n.max(1) as f64;
    if !scale.is_finite() {
        return Err(Error::NonFinite("covariance matrix"));
    }
    for eps in JITTER_LEVELS {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += eps * scale;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, eps));
        }
    }
    let worst = SymmetricEigen::new(k.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Err(Error::NotPsd {
        worst_eigenvalue: worst,
    })
}
