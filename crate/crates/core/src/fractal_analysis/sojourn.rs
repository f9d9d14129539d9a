use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::report::{num, EstimateReport, Table, Uncertainty};
use crate::spectral_model::GaugeFunction;
use crate::synthesis::{FieldSample, GaussianEnsemble, GridSpec};

use super::{ensemble_hurst, quantile};

/// Trapezoid weights of the grid points; they sum to one.
pub fn sojourn_weights(grid: &GridSpec) -> Vec<f64> {
    let axis: Vec<Vec<f64>> = grid
        .resolution
        .iter()
        .map(|&m| {
            let h = 1.0 / (m - 1) as f64;
            (0..m).map(|i| if i == 0 || i == m - 1 { 0.5 * h } else { h }).collect()
        })
        .collect();
    (0..grid.len())
        .map(|k| grid.index(k).iter().enumerate().map(|(j, &i)| axis[j][i]).product())
        .collect()
}

fn in_ball(x: &[f64], y: &[f64], r: f64) -> bool {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r * r
}

fn check_point(sample: &FieldSample, y: &[f64], r: f64) -> Result<()> {
    if y.len() != sample.d {
        return Err(Error::DimensionMismatch {
            expected: sample.d,
            got: y.len(),
        });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("sojourn radius must be positive, got {r}")));
    }
    Ok(())
}

/// `T_y(r)`: Lebesgue measure of `{t in [0,1]^N : |X(t) - y| <= r}` by the
/// trapezoid rule on the sample grid.
pub fn sojourn_time(sample: &FieldSample, y: &[f64], r: f64) -> Result<f64> {
    check_point(sample, y, r)?;
    let w = sojourn_weights(&sample.grid);
    Ok(weighted_sojourn(sample, &w, y, r))
}

fn weighted_sojourn(sample: &FieldSample, w: &[f64], y: &[f64], r: f64) -> f64 {
    sample
        .values
        .chunks_exact(sample.d)
        .zip(w)
        .filter(|(x, _)| in_ball(x, y, r))
        .map(|(_, w)| w)
        .sum()
}

/// Contribution of every grid cell to `T_y(r)`: the cell volume times the
/// fraction of its corners inside the ball. Cells are listed in row-major
/// order of their lower corner; the contributions sum to `sojourn_time`.
pub fn sojourn_contributions(sample: &FieldSample, y: &[f64], r: f64) -> Result<Vec<f64>> {
    check_point(sample, y, r)?;
    let grid = &sample.grid;
    let n = grid.n_dims();
    let inside: Vec<bool> = sample.values.chunks_exact(sample.d).map(|x| in_ball(x, y, r)).collect();
    let cells = GridSpec {
        resolution: grid.resolution.iter().map(|m| m - 1).collect(),
    };
    let corners = 1usize << n;
    let vol = grid.cell_volume() / corners as f64;
    let n_cells: usize = cells.resolution.iter().product();
    let mut out = Vec::with_capacity(n_cells);
    let mut corner = vec![0usize; n];
    for c in 0..n_cells {
        let lower = cells.index(c);
        let mut hits = 0usize;
        for mask in 0..corners {
            for j in 0..n {
                corner[j] = lower[j] + ((mask >> j) & 1);
            }
            hits += inside[grid.flat(&corner)] as usize;
        }
        out.push(vol * hits as f64);
    }
    Ok(out)
}

/// `T_0(r)` for each replicate (rows) and radius (columns).
pub fn sojourn_times(ens: &GaussianEnsemble, r_values: &[f64]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = ens.replicates.first() else {
        return Ok(Vec::new());
    };
    let y = vec![0.0; first.d];
    for &r in r_values {
        check_point(first, &y, r)?;
    }
    let w = sojourn_weights(&first.grid);
    Ok(ens
        .replicates
        .par_iter()
        .map(|s| r_values.iter().map(|&r| weighted_sojourn(s, &w, &y, r)).collect())
        .collect())
}

/// Moments of the sojourn time at `y = 0` against the envelope
/// `c^n n! r^{Qn}`.
pub fn sojourn_moment_check(
    ens: &GaussianEnsemble,
    r_values: &[f64],
    n_values: &[u32],
    bound: f64,
) -> Result<EstimateReport> {
    let first = ens
        .replicates
        .first()
        .ok_or_else(|| Error::Insufficient("empty ensemble".into()))?;
    let q = ensemble_hurst(ens)?.q_exponent();
    if first.d as f64 <= q {
        return Err(Error::invalid(format!("sojourn moments need d > Q, got d = {} and Q = {q}", first.d)));
    }
    let times = sojourn_times(ens, r_values)?;
    sojourn_moments_from_times(&times, r_values, n_values, q, bound)
}

/// The moment table from precomputed `T(r)` values, one row per replicate.
pub fn sojourn_moments_from_times(
    times: &[Vec<f64>],
    r_values: &[f64],
    n_values: &[u32],
    q: f64,
    bound: f64,
) -> Result<EstimateReport> {
    let reps = times.len();
    if reps < 2 {
        return Err(Error::Insufficient("need at least two replicates".into()));
    }
    if n_values.is_empty() || r_values.is_empty() || n_values.contains(&0) {
        return Err(Error::invalid("need positive moment orders and at least one radius"));
    }
    if times.iter().any(|row| row.len() != r_values.len()) {
        return Err(Error::DimensionMismatch {
            expected: r_values.len(),
            got: times.iter().map(Vec::len).find(|&l| l != r_values.len()).unwrap_or(0),
        });
    }
    let mut report = EstimateReport::new("sojourn_moment_check", format!("max/min of m(n, r) <= {bound}"))
        .param("r_values", r_values)
        .param("n_values", n_values)
        .param("q", q)
        .param("replicates", reps);
    let mut table = Table::new(["n", "r", "moment", "stderr", "m"]);
    let mut ms = Vec::new();
    let mut means_n1 = Vec::new();
    for &n in n_values {
        let fact: f64 = (1..=n).map(f64::from).product();
        for (k, &r) in r_values.iter().enumerate() {
            let xs: Vec<f64> = times.iter().map(|row| row[k].powi(n as i32)).collect();
            let mean = xs.iter().sum::<f64>() / reps as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            if !(mean > 0.0) || se > 0.5 * mean {
                return Err(Error::Insufficient(format!(
                    "E T(r)^n for n = {n}, r = {r}: estimate {mean:e} with stderr {se:e}; more replicates needed"
                )));
            }
            let m = (mean / (fact * r.powf(q * n as f64))).powf(1.0 / n as f64);
            if n == 1 {
                means_n1.push((r, mean));
            }
            ms.push(m);
            table.push(vec![Value::from(n), num(r), num(mean), num(se), num(m)]);
        }
    }
    let lo = ms.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ms.iter().cloned().fold(0.0, f64::max);
    let ratio = hi / lo;
    // E T(2r) / E T(r) against 2^Q
    let doubling: Vec<f64> = means_n1
        .iter()
        .flat_map(|&(r, a)| {
            means_n1
                .iter()
                .filter(move |&&(s, _)| (s / r - 2.0).abs() < 1e-9)
                .map(move |&(_, b)| b / a)
        })
        .collect();
    report.diag("m_min", num(lo));
    report.diag("m_max", num(hi));
    report.diag("ratio", num(ratio));
    report.diag("doubling_ratios", doubling.iter().map(|x| num(*x)).collect::<Vec<_>>());
    report.diag("doubling_target", num(2f64.powf(q)));
    report.set_estimate(hi, f64::NAN, Uncertainty::StdErr);
    report.pass = ratio.is_finite() && ratio <= bound;
    report.table = table;
    Ok(report)
}

/// Minimum number of grid points inside the smallest ball before a radius
/// is flagged as unresolved.
pub const MIN_RESOLVED_POINTS: usize = 10;

/// Per replicate, `max_r T_{X(tau)}(r) / phi_1(r)` over the decreasing
/// `r_values`; reports the 95th percentile and how it moves as the radius
/// range extends downward.
pub fn lil_statistic(ens: &GaussianEnsemble, tau: usize, r_values: &[f64], growth_tol: f64) -> Result<EstimateReport> {
    let first = ens
        .replicates
        .first()
        .ok_or_else(|| Error::Insufficient("empty ensemble".into()))?;
    if tau >= first.len() {
        return Err(Error::invalid(format!("grid point {tau} out of range")));
    }
    if r_values.len() < 2 || r_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("need at least two strictly decreasing radii"));
    }
    let q = ensemble_hurst(ens)?.q_exponent();
    let gauge = GaugeFunction::power_log_log(q)?;
    if r_values.iter().any(|&r| !(r > 0.0 && r < gauge.domain_limit())) {
        return Err(Error::invalid("radii must lie in (0, 1/e)"));
    }
    let phi: Vec<f64> = r_values.iter().map(|&r| gauge.eval(r)).collect::<Result<_>>()?;
    let w = sojourn_weights(&first.grid);
    // rows: per replicate, ratio T/phi and point count per radius
    let rows: Vec<(Vec<f64>, Vec<usize>)> = ens
        .replicates
        .par_iter()
        .map(|s| {
            let y = s.value(tau).to_vec();
            let mut ratios = Vec::with_capacity(r_values.len());
            let mut counts = Vec::with_capacity(r_values.len());
            for (&r, &p) in r_values.iter().zip(&phi) {
                let mut t = 0.0;
                let mut c = 0;
                for (x, wk) in s.values.chunks_exact(s.d).zip(&w) {
                    if in_ball(x, &y, r) {
                        t += wk;
                        c += 1;
                    }
                }
                ratios.push(t / p);
                counts.push(c);
            }
            (ratios, counts)
        })
        .collect();
    let mut report = EstimateReport::new(
        "lil_statistic",
        format!("95th percentile finite and grows by at most {growth_tol} when the smallest radius is added"),
    )
    .param("tau", tau)
    .param("r_values", r_values)
    .param("q", q)
    .param("replicates", ens.len());
    let mut table = Table::new(["r_min", "p50", "p95", "median_points", "resolved"]);
    let mut p95s = Vec::new();
    let mut unresolved = Vec::new();
    for k in 0..r_values.len() {
        let mut stat: Vec<f64> = rows
            .iter()
            .map(|(ratios, _)| ratios[..=k].iter().cloned().fold(0.0, f64::max))
            .collect();
        stat.sort_by(f64::total_cmp);
        let mut counts: Vec<usize> = rows.iter().map(|(_, c)| c[k]).collect();
        counts.sort_unstable();
        let median_points = counts[counts.len() / 2];
        let resolved = median_points >= MIN_RESOLVED_POINTS;
        if !resolved {
            unresolved.push(r_values[k]);
        }
        let p95 = quantile(&stat, 0.95);
        p95s.push(p95);
        table.push(vec![
            num(r_values[k]),
            num(quantile(&stat, 0.5)),
            num(p95),
            Value::from(median_points),
            Value::from(resolved),
        ]);
    }
    let last = *p95s.last().unwrap();
    let growth = last / p95s[p95s.len() - 2];
    let degenerate = ens.replicates.iter().all(|s| s.values.iter().all(|v| *v == 0.0));
    report.diag("p95", num(last));
    report.diag("p95_by_r_min", p95s.iter().map(|x| num(*x)).collect::<Vec<_>>());
    report.diag("growth", num(growth));
    report.diag("unresolved_r", &unresolved);
    report.diag("degenerate", degenerate);
    if degenerate {
        report.note("field is identically zero; the statistic is 1/phi_1(r_min)");
    }
    if !unresolved.is_empty() {
        report.note("some radii hold fewer than 10 grid points in the median replicate");
    }
    report.set_estimate(last, f64::NAN, Uncertainty::None);
    report.pass = last.is_finite() && growth <= growth_tol;
    report.table = table;
    Ok(report)
}
