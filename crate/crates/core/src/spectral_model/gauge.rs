use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hausdorff gauge functions `phi(r) = r^alpha` and `phi_1(r) = r^q log log(1/r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaugeFunction {
    Power { alpha: f64 },
    PowerLogLog { q: f64 },
}

impl GaugeFunction {
    pub fn power(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(GaugeFunction::Power { alpha })
        } else {
            Err(Error::invalid(format!("gauge exponent must be positive, got {alpha}")))
        }
    }

    pub fn power_log_log(q: f64) -> Result<Self> {
        if q > 0.0 && q.is_finite() {
            Ok(GaugeFunction::PowerLogLog { q })
        } else {
            Err(Error::invalid(format!("gauge exponent must be positive, got {q}")))
        }
    }

    /// Upper end of the evaluation domain (exclusive).
    pub fn domain_limit(&self) -> f64 {
        match self {
            GaugeFunction::Power { .. } => f64::INFINITY,
            GaugeFunction::PowerLogLog { .. } => (-1.0f64).exp(),
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 0.0 {
            return Err(Error::invalid(format!("gauge argument must be nonnegative, got {r}")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        match *self {
            GaugeFunction::Power { alpha } => Ok(r.powf(alpha)),
            GaugeFunction::PowerLogLog { q } => {
                if r >= self.domain_limit() {
                    return Err(Error::invalid(format!(
                        "phi_1 is only defined on (0, 1/e); got r = {r}"
                    )));
                }
                Ok(r.powf(q) * (1.0 / r).ln().ln())
            }
        }
    }
}
