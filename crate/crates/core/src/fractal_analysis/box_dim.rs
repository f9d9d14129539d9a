use std::collections::HashSet;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::report::{linear_fit, num, EstimateReport, Table, Uncertainty};
use crate::synthesis::FieldSample;

/// Box-counting dimension of a finite set in `R^d` (point-major `points`).
///
/// Boxes are `prod_i [k_i eps, (k_i + 1) eps)` on a lattice anchored at the
/// origin. With four or more scales the largest and smallest are left out
/// of the regression of `log N(eps)` on `log(1/eps)`.
pub fn box_dimension(points: &[f64], d: usize, scales: &[f64]) -> Result<EstimateReport> {
    if d == 0 || points.len() % d != 0 {
        return Err(Error::invalid("point buffer length is not a multiple of d"));
    }
    if scales.len() < 2 {
        return Err(Error::invalid("box counting needs at least two scales"));
    }
    if scales.windows(2).any(|w| !(w[1] < w[0])) || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("scales must be positive and strictly decreasing"));
    }
    let n_points = points.len() / d;
    let mut report = EstimateReport::new("box_dimension", "regression slope with R^2")
        .param("scales", scales)
        .param("points", n_points)
        .param("d", d);
    let mut table = Table::new(["scale", "log_inv_scale", "count", "log_count", "in_fit"]);
    let mut counts = Vec::with_capacity(scales.len());
    for &eps in scales {
        let mut boxes: HashSet<Vec<i64>> = HashSet::with_capacity(n_points);
        for p in points.chunks_exact(d) {
            boxes.insert(p.iter().map(|x| (x / eps).floor() as i64).collect());
        }
        counts.push(boxes.len());
    }
    if counts.iter().all(|&c| c == n_points) {
        return Err(Error::Insufficient(
            "every box holds at most one point at all scales; sample more finely or use coarser scales".into(),
        ));
    }
    let (lo, hi) = if scales.len() >= 4 { (1, scales.len() - 1) } else { (0, scales.len()) };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, (&eps, &c)) in scales.iter().zip(&counts).enumerate() {
        let x = (1.0 / eps).ln();
        let y = (c as f64).ln();
        let used = (lo..hi).contains(&k);
        if used {
            xs.push(x);
            ys.push(y);
        }
        table.push(vec![num(eps), num(x), Value::from(c), num(y), Value::from(used)]);
    }
    let (slope, intercept, r2, resid) =
        linear_fit(&xs, &ys).ok_or_else(|| Error::Insufficient("degenerate regression".into()))?;
    report.diag("counts", &counts);
    report.diag("slope", num(slope));
    report.diag("intercept", num(intercept));
    report.diag("r2", num(r2));
    report.diag("saturated_scales", counts.iter().filter(|&&c| c == n_points).count());
    if lo > 0 {
        report.note("largest and smallest scales excluded from the fit");
    }
    report.set_estimate(slope, resid, Uncertainty::FitResidual);
    report.pass = slope.is_finite();
    report.table = table;
    Ok(report)
}

/// Box dimension of the range `X([0,1]^N)` of one sample.
pub fn sample_box_dimension(sample: &FieldSample, scales: &[f64]) -> Result<EstimateReport> {
    box_dimension(&sample.values, sample.d, scales)
}

/// Scales `2^{-k}` for `k` in `first..=last`.
pub fn dyadic_scales(first: i32, last: i32) -> Vec<f64> {
    (first..=last).map(|k| 2f64.powi(-k)).collect()
}
