//! Estimators on sampled fields: box dimension of the range, gauge cover
//! sums, sojourn times and small-ball probabilities.

mod box_dim;
mod cover;
mod small_ball;
mod sojourn;

pub use box_dim::{box_dimension, dyadic_scales, sample_box_dimension};
pub use cover::{diameter, gauge_cover_sum, EXACT_DIAMETER_POINTS, MAX_RECTANGLES};
pub use small_ball::{
    ball_indices, continuity_correction, restricted_sup, sup_norm_over, small_ball_fit, small_ball_from_sups, small_ball_prob,
    wilson_interval, MAX_SCALED_RADIUS,
};
pub use sojourn::{
    lil_statistic, sojourn_contributions, sojourn_moment_check, sojourn_moments_from_times,
    sojourn_time, sojourn_times, sojourn_weights, MIN_RESOLVED_POINTS,
};

use crate::error::{Error, Result};
use crate::spectral_model::HurstVector;
use crate::synthesis::{FieldSample, GaussianEnsemble};

/// Metric exponents recorded with the sample, rebuilding the model if absent.
pub fn sample_hurst(sample: &FieldSample) -> Result<HurstVector> {
    match &sample.model.hurst {
        Some(h) => Ok(h.clone()),
        None => Ok(sample.model.build()?.hurst().clone()),
    }
}

fn ensemble_hurst(ens: &GaussianEnsemble) -> Result<HurstVector> {
    let first = ens
        .replicates
        .first()
        .ok_or_else(|| Error::Insufficient("empty ensemble".into()))?;
    sample_hurst(first)
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}
