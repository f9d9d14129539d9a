use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-axis smoothness exponents `H = (H_1, ..., H_N)`, each in `(0, 1)`.
///
/// Inputs are kept in the order given; [`HurstVector::sorted`] is available
/// when a nondecreasing arrangement is wanted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HurstVector(Vec<f64>);

impl HurstVector {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidHurst("at least one exponent is required".into()));
        }
        for (j, &hj) in h.iter().enumerate() {
            if !(hj > 0.0 && hj < 1.0) {
                return Err(Error::InvalidHurst(format!(
                    "H_{} = {hj} is outside the open interval (0, 1)",
                    j + 1
                )));
            }
        }
        Ok(Self(h))
    }

    pub fn uniform(h: f64, n_dims: usize) -> Result<Self> {
        Self::new(vec![h; n_dims])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `Q = sum_j 1/H_j`; always exceeds `N`.
    pub fn q_exponent(&self) -> f64 {
        self.0.iter().map(|h| 1.0 / h).sum()
    }

    pub fn sorted(&self) -> HurstVector {
        let mut h = self.0.clone();
        h.sort_by(|a, b| a.partial_cmp(b).expect("finite exponents"));
        HurstVector(h)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<Vec<f64>> for HurstVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        HurstVector::new(v)
    }
}

impl From<HurstVector> for Vec<f64> {
    fn from(h: HurstVector) -> Vec<f64> {
        h.0
    }
}

/// Anisotropic distance `rho(s, t) = sum_j |s_j - t_j|^{H_j}`.
pub fn rho(s: &[f64], t: &[f64], h: &HurstVector) -> Result<f64> {
    let n = h.len();
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.len(),
        });
    }
    if t.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: t.len(),
        });
    }
    Ok(rho_unchecked(s, t, h.as_slice()))
}

pub(crate) fn rho_unchecked(s: &[f64], t: &[f64], h: &[f64]) -> f64 {
    s.iter()
        .zip(t)
        .zip(h)
        .map(|((a, b), hj)| {
            let d = (a - b).abs();
            if d == 0.0 {
                0.0
            } else {
                d.powf(*hj)
            }
        })
        .sum()
}

/// `rho(0, x)`.
pub(crate) fn rho_norm(x: &[f64], h: &[f64]) -> f64 {
    x.iter()
        .zip(h)
        .map(|(a, hj)| if *a == 0.0 { 0.0 } else { a.abs().powf(*hj) })
        .sum()
}
