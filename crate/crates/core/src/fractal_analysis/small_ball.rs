use serde_json::Value;

use crate::error::{Error, Result};
use crate::report::{linear_fit, num, EstimateReport, Table, Uncertainty};
use crate::spectral_model::{rho, HurstVector};
use crate::synthesis::{FieldSample, GaussianEnsemble, GridSpec};

use super::ensemble_hurst;

/// Largest `(r/eps)^Q` for which the probability is still estimated.
pub const MAX_SCALED_RADIUS: f64 = 8.0;
const Z95: f64 = 1.959963984540054;

/// Flat indices of the grid points with `rho(0, t) <= r`.
pub fn ball_indices(grid: &GridSpec, h: &HurstVector, r: f64) -> Result<Vec<usize>> {
    let origin = vec![0.0; grid.n_dims()];
    let mut out = Vec::new();
    for k in 0..grid.len() {
        if rho(&origin, &grid.point(k), h)? <= r {
            out.push(k);
        }
    }
    Ok(out)
}

/// `max |X(t)|` over the given grid points.
pub fn sup_norm_over(sample: &FieldSample, indices: &[usize]) -> f64 {
    indices
        .iter()
        .map(|&k| sample.value(k).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// `max |X(t)|` over the grid points with `rho(0, t) <= r`.
pub fn restricted_sup(sample: &FieldSample, h: &HurstVector, r: f64) -> Result<f64> {
    Ok(sup_norm_over(sample, &ball_indices(&sample.grid, h, r)?))
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Size of the sampled grid's gaps in the metric, `rho` of one grid step
/// on every axis, and the matching modulus `delta sqrt(log(1 + 1/delta))`.
pub fn continuity_correction(sample: &FieldSample, h: &HurstVector) -> Result<f64> {
    let step: Vec<f64> = (0..sample.grid.n_dims()).map(|j| sample.grid.spacing(j)).collect();
    let delta = rho(&vec![0.0; step.len()], &step, h)?;
    Ok(delta * (1.0 + 1.0 / delta).ln().sqrt())
}

/// `P{sup_{rho(0,t) <= r} |X(t)| <= eps}` from restricted sups computed at
/// radius `r`.
pub fn small_ball_from_sups(sups: &[f64], r: f64, eps: f64, q: f64) -> Result<EstimateReport> {
    if !(r > 0.0 && eps > 0.0) {
        return Err(Error::invalid("r and eps must be positive"));
    }
    let scaled = (r / eps).powf(q);
    if scaled > MAX_SCALED_RADIUS {
        return Err(Error::invalid(format!(
            "(r/eps)^Q = {scaled:.3} exceeds {MAX_SCALED_RADIUS}; the probability is too small to estimate"
        )));
    }
    if sups.is_empty() {
        return Err(Error::Insufficient("no replicates".into()));
    }
    let hits = sups.iter().filter(|&&s| s <= eps).count();
    let n = sups.len();
    let (lo, hi) = wilson_interval(hits, n);
    let p = hits as f64 / n as f64;
    let mut report = EstimateReport::new("small_ball_prob", "estimate with a Wilson 95% interval")
        .param("r", r)
        .param("eps", eps)
        .param("q", q)
        .param("replicates", n);
    report.diag("scaled_radius", num(scaled));
    report.diag("successes", hits);
    report.diag("ci_low", num(lo));
    report.diag("ci_high", num(hi));
    if hits == 0 {
        report.note(format!("no successes; only the upper bound {hi:e} is informative"));
        report.set_estimate(f64::NAN, f64::NAN, Uncertainty::None);
        report.pass = false;
    } else {
        report.diag("neg_log_p", num(-p.ln()));
        report.set_estimate(p, (p * (1.0 - p) / n as f64).sqrt(), Uncertainty::StdErr);
        report.pass = true;
    }
    Ok(report)
}

/// Small-ball probability over an ensemble. The grid maximum stands in for
/// the supremum; the continuity correction is reported next to `eps / 10`.
pub fn small_ball_prob(ens: &GaussianEnsemble, r: f64, eps: f64) -> Result<EstimateReport> {
    let first = ens
        .replicates
        .first()
        .ok_or_else(|| Error::Insufficient("empty ensemble".into()))?;
    let h = ensemble_hurst(ens)?;
    let ball = ball_indices(&first.grid, &h, r)?;
    let sups: Vec<f64> = ens.replicates.iter().map(|s| sup_norm_over(s, &ball)).collect();
    let mut report = small_ball_from_sups(&sups, r, eps, h.q_exponent())?;
    let cc = continuity_correction(first, &h)?;
    report.diag("continuity_correction", num(cc));
    if cc >= eps / 10.0 {
        report.note("grid spacing is coarse relative to eps; the grid max underestimates the sup");
    }
    Ok(report)
}

/// Least-squares fit of `-log P` against `(r/eps)^Q` over the given
/// small-ball reports. Reports without successes are left out.
pub fn small_ball_fit(reports: &[EstimateReport], min_r2: f64) -> Result<EstimateReport> {
    let mut out = EstimateReport::new("small_ball_fit", format!("slope > 0 and R^2 >= {min_r2}"));
    let mut table = Table::new(["scaled_radius", "neg_log_p", "successes", "in_fit"]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in reports {
        let x = r
            .diag_f64("scaled_radius")
            .ok_or_else(|| Error::invalid("report is not a small-ball estimate"))?;
        let hits = r.diag_f64("successes").unwrap_or(0.0);
        let y = r.diag_f64("neg_log_p");
        if let Some(y) = y {
            xs.push(x);
            ys.push(y);
        }
        table.push(vec![num(x), y.map_or(Value::Null, num), num(hits), Value::from(y.is_some())]);
    }
    out.diag("pairs", reports.len());
    out.diag("pairs_in_fit", xs.len());
    out.table = table;
    if xs.len() < 3 {
        out.note("fewer than three pairs with successes; no fit");
        out.diag("slope", Value::Null);
        out.pass = false;
        return Ok(out);
    }
    let (slope, intercept, r2, resid) =
        linear_fit(&xs, &ys).ok_or_else(|| Error::Insufficient("degenerate regression".into()))?;
    out.diag("slope", num(slope));
    out.diag("intercept", num(intercept));
    out.diag("r2", num(r2));
    out.set_estimate(slope, resid, Uncertainty::FitResidual);
    out.pass = slope > 0.0 && r2 >= min_r2;
    Ok(out)
}
