//! Exact Gaussian conditioning and sampling audits of the two-sided variogram
//! bound (C1) and strong local nondeterminism (C2).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::report::{num, EstimateReport, Table, Uncertainty};
use crate::spectral_model::{rho, HurstVector, SpectralModel};
use crate::synthesis::jittered_cholesky;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningInstance {
    pub u: Vec<f64>,
    pub conditioners: Vec<Vec<f64>>,
}

impl ConditioningInstance {
    pub fn new(u: Vec<f64>, conditioners: Vec<Vec<f64>>) -> Result<Self> {
        let inst = Self { u, conditioners };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.u.len();
        let in_unit = |p: &[f64]| p.iter().all(|x| (0.0..=1.0).contains(x));
        if !in_unit(&self.u) {
            return Err(Error::invalid(format!("u = {:?} is outside [0,1]^N", self.u)));
        }
        for t in &self.conditioners {
            if t.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.len(),
                });
            }
            if !in_unit(t) {
                return Err(Error::invalid(format!("conditioner {t:?} is outside [0,1]^N")));
            }
            if *t == self.u {
                return Err(Error::invalid("u coincides with a conditioner"));
            }
        }
        Ok(())
    }

    /// `min_{0 <= k <= n} rho(u, t^k)^2` with `t^0 = 0`.
    pub fn min_rho_sq(&self, h: &HurstVector) -> Result<f64> {
        let origin = vec![0.0; self.u.len()];
        let mut m = rho(&self.u, &origin, h)?;
        for t in &self.conditioners {
            m = m.min(rho(&self.u, t, h)?);
        }
        Ok(m * m)
    }
}

/// `Var(X_0(u) | X_0(t^1), ..., X_0(t^n))` by the Schur complement.
///
/// Conditioners are deduplicated and sorted, and those at the origin (where
/// `X_0 = 0`) dropped, so the result does not depend on their order.
pub fn conditional_variance(model: &SpectralModel, inst: &ConditioningInstance) -> Result<f64> {
    inst.validate()?;
    if inst.u.len() != model.dims() {
        return Err(Error::DimensionMismatch {
            expected: model.dims(),
            got: inst.u.len(),
        });
    }
    let mut ts: Vec<&Vec<f64>> = inst
        .conditioners
        .iter()
        .filter(|t| t.iter().any(|&x| x != 0.0))
        .collect();
    ts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    ts.dedup();
    let var_u = model.variogram(&inst.u)?;
    if ts.is_empty() {
        return Ok(var_u);
    }
    let n = ts.len();
    let var_t: Vec<f64> = ts.iter().map(|t| model.variogram(t)).collect::<Result<_>>()?;
    let cov = |a: &[f64], va: f64, b: &[f64], vb: f64| -> Result<f64> {
        let lag: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Ok(0.5 * (va + vb - model.variogram(&lag)?))
    };
    let mut k = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    for i in 0..n {
        k[(i, i)] = var_t[i];
        for j in 0..i {
            let c = cov(ts[i], var_t[i], ts[j], var_t[j])?;
            k[(i, j)] = c;
            k[(j, i)] = c;
        }
        r[i] = cov(ts[i], var_t[i], &inst.u, var_u)?;
    }
    let (chol, _) = jittered_cholesky(&k).map_err(|e| match e {
        Error::NotPsd { worst_eigenvalue } => Error::Degenerate(format!(
            "conditioner covariance is singular beyond the jitter budget (worst eigenvalue {worst_eigenvalue:e})"
        )),
        other => other,
    })?;
    let w = chol
        .l()
        .solve_lower_triangular(&r)
        .ok_or_else(|| Error::Degenerate("triangular solve failed".into()))?;
    let cond = var_u - w.norm_squared();
    if cond < -1e-8 * var_u {
        return Err(Error::Degenerate(format!(
            "conditional variance {cond:e} is negative beyond tolerance (Var X(u) = {var_u:e})"
        )));
    }
    Ok(cond.max(0.0))
}

/// Conditioner layouts used by [`check_c2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Random,
    /// `t^k = u +- delta 2^k e_j`.
    Chain,
    /// Points at distance about `delta` around `u`.
    Cluster,
    /// Points on a line through `u`.
    Collinear,
    /// Points of a coarse lattice near `u`.
    Lattice,
}

impl Layout {
    fn name(self) -> &'static str {
        match self {
            Layout::Random => "random",
            Layout::Chain => "chain",
            Layout::Cluster => "cluster",
            Layout::Collinear => "collinear",
            Layout::Lattice => "lattice",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C2Options {
    pub trials: usize,
    pub n_max: usize,
    pub seed: u64,
    /// Adversarial instances added per random trial.
    #[serde(default = "default_adversarial_fraction")]
    pub adversarial_fraction: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Points are drawn from `[0, side]^N`; `side < 1` restricts to a
    /// neighbourhood of the origin.
    #[serde(default = "default_side")]
    pub side: f64,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
}

fn default_adversarial_fraction() -> f64 {
    0.5
}
fn default_floor() -> f64 {
    1e-4
}
fn default_side() -> f64 {
    1.0
}
fn default_deltas() -> Vec<f64> {
    vec![1e-3, 1e-2]
}

impl C2Options {
    pub fn new(trials: usize, n_max: usize, seed: u64) -> Self {
        Self {
            trials,
            n_max,
            seed,
            adversarial_fraction: default_adversarial_fraction(),
            floor: default_floor(),
            side: default_side(),
            deltas: default_deltas(),
        }
    }
}

/// The instance set of [`check_c2`]: `trials` random instances followed by
/// adversarial ones cycling through the structured layouts.
pub fn c2_instances(n_dims: usize, opts: &C2Options) -> Result<Vec<(Layout, ConditioningInstance)>> {
    if opts.trials == 0 {
        return Err(Error::invalid("check_c2 needs at least one trial"));
    }
    if !(opts.side > 0.0 && opts.side <= 1.0) {
        return Err(Error::invalid(format!("side {} must lie in (0, 1]", opts.side)));
    }
    if opts.deltas.iter().any(|d| !(*d > 0.0)) || opts.deltas.is_empty() {
        return Err(Error::invalid("deltas must be positive and nonempty"));
    }
    let adversarial = (opts.trials as f64 * opts.adversarial_fraction).round() as usize;
    let structured = [Layout::Chain, Layout::Cluster, Layout::Collinear, Layout::Lattice];
    (0..opts.trials + adversarial)
        .map(|k| {
            let layout = if k < opts.trials {
                Layout::Random
            } else {
                structured[(k - opts.trials) % structured.len()]
            };
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ k as u64);
            let delta = opts.deltas[(k / structured.len()) % opts.deltas.len()] * opts.side;
            let inst = draw_instance(&mut rng, n_dims, layout, opts.n_max, opts.side, delta);
            Ok((layout, inst))
        })
        .collect()
}

fn draw_instance(
    rng: &mut ChaCha8Rng,
    n_dims: usize,
    layout: Layout,
    n_max: usize,
    side: f64,
    delta: f64,
) -> ConditioningInstance {
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n_dims).map(|_| side * rng.random::<f64>()).collect() };
    let clamp = |x: f64| x.clamp(0.0, side);
    let u = point(rng);
    let n = rng.random_range(0..=n_max);
    let mut ts: Vec<Vec<f64>> = match layout {
        Layout::Random => (0..n).map(|_| point(rng)).collect(),
        Layout::Chain => {
            let axis = rng.random_range(0..n_dims);
            (0..n)
                .map(|k| {
                    let step = delta * 2f64.powi(k as i32);
                    let mut t = u.clone();
                    t[axis] = if u[axis] + step <= side { u[axis] + step } else { clamp(u[axis] - step) };
                    t
                })
                .collect()
        }
        Layout::Cluster => (0..n)
            .map(|_| u.iter().map(|&x| clamp(x + delta * (2.0 * rng.random::<f64>() - 1.0))).collect())
            .collect(),
        Layout::Collinear => {
            let dir: Vec<f64> = (0..n_dims).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            (0..n)
                .map(|_| {
                    let s = (2.0 * rng.random::<f64>() - 1.0) * side;
                    u.iter().zip(&dir).map(|(x, d)| clamp(x + s * d)).collect()
                })
                .collect()
        }
        Layout::Lattice => {
            let step = 4.0 * delta;
            (0..n)
                .map(|_| {
                    u.iter()
                        .map(|&x| {
                            let k = rng.random_range(-2i32..=2) as f64;
                            clamp((x / step).round() * step + k * step)
                        })
                        .collect()
                })
                .collect()
        }
    };
    ts.retain(|t| *t != u);
    ConditioningInstance { u, conditioners: ts }
}

/// Samples conditioning instances and reports
/// `Var(X_0(u) | X_0(t^k)) / min_k rho(u, t^k)^2`; PASS iff the smallest
/// ratio reaches `opts.floor`.
pub fn check_c2(model: &SpectralModel, h: &HurstVector, opts: &C2Options) -> Result<EstimateReport> {
    if h.len() != model.dims() {
        return Err(Error::DimensionMismatch {
            expected: model.dims(),
            got: h.len(),
        });
    }
    let instances = c2_instances(model.dims(), opts)?;
    let rows: Vec<std::result::Result<(f64, f64, f64), String>> = instances
        .par_iter()
        .map(|(_, inst)| {
            let denom = inst.min_rho_sq(h).map_err(|e| e.to_string())?;
            let cond = conditional_variance(model, inst).map_err(|e| e.to_string())?;
            Ok((denom, cond, cond / denom))
        })
        .collect();
    let mut report = EstimateReport::new("check_c2", format!("min ratio >= {}", opts.floor))
        .param("measure", model.measure().kind_name())
        .param("hurst", h.as_slice())
        .param("trials", opts.trials)
        .param("n_max", opts.n_max)
        .param("seed", opts.seed)
        .param("side", opts.side)
        .param("deltas", &opts.deltas)
        .param("floor", opts.floor);
    let mut table = Table::new(["trial", "layout", "n", "min_rho_sq", "cond_var", "ratio", "status"]);
    let mut ratios = Vec::new();
    let mut degenerate = 0usize;
    for (k, ((layout, inst), row)) in instances.iter().zip(&rows).enumerate() {
        let head = vec![Value::from(k), layout.name().into(), inst.conditioners.len().into()];
        let tail = match row {
            Ok((denom, cond, ratio)) => {
                ratios.push(*ratio);
                vec![num(*denom), num(*cond), num(*ratio), "ok".into()]
            }
            Err(msg) => {
                degenerate += 1;
                vec![Value::Null, Value::Null, Value::Null, format!("degenerate: {msg}").into()]
            }
        };
        table.push(head.into_iter().chain(tail).collect());
    }
    if ratios.is_empty() {
        return Err(Error::Degenerate("every C2 instance was degenerate".into()));
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let median = sorted[sorted.len() / 2];
    report.diag("min_ratio", num(min));
    report.diag("median_ratio", num(median));
    report.diag("max_ratio", num(*sorted.last().expect("nonempty")));
    report.diag("instances", instances.len());
    report.diag("degenerate", degenerate);
    if opts.side < 1.0 {
        report.note(format!("points restricted to [0, {}]^N", opts.side));
    }
    report.set_estimate(min, f64::NAN, Uncertainty::None);
    report.pass = min.is_finite() && min >= opts.floor;
    report.table = table;
    Ok(report)
}

/// Samples `pairs` pairs with `rho(s, t)` log-uniform in `[1e-3, 1]` and
/// reports `sigma^2(s - t) / rho(s, t)^2` and
/// `c_{1,1} = max(max ratio, 1 / min ratio)`; PASS iff that is finite.
pub fn check_c1(model: &SpectralModel, h: &HurstVector, pairs: usize, seed: u64) -> Result<EstimateReport> {
    check_c1_on(model, h, pairs, seed, 1.0)
}

/// [`check_c1`] with points in `[0, side]^N`.
pub fn check_c1_on(
    model: &SpectralModel,
    h: &HurstVector,
    pairs: usize,
    seed: u64,
    side: f64,
) -> Result<EstimateReport> {
    let n = model.dims();
    if h.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: h.len() });
    }
    if pairs == 0 {
        return Err(Error::invalid("check_c1 needs at least one pair"));
    }
    let hs = h.as_slice();
    let (lo, hi) = (1e-3f64, side.powf(h.max()));
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k as u64);
            let ell = (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp();
            // split ell over the axes: |lag_j|^{H_j} = ell * w_j
            let mut w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            let lag: Vec<f64> = w
                .iter()
                .zip(hs)
                .map(|(wj, hj)| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * (ell * wj).powf(1.0 / hj).min(side)
                })
                .collect();
            let s: Vec<f64> = lag
                .iter()
                .map(|&l| {
                    let room = side - l.abs();
                    let x = room * rng.random::<f64>();
                    if l < 0.0 { x + l.abs() } else { x }
                })
                .collect();
            let t: Vec<f64> = s.iter().zip(&lag).map(|(a, l)| a + l).collect();
            (s, t)
        })
        .collect();
    let rows: Vec<std::result::Result<(f64, f64), String>> = draws
        .par_iter()
        .map(|(s, t)| {
            let r = rho(s, t, h).map_err(|e| e.to_string())?;
            let lag: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
            let v = model.variogram(&lag).map_err(|e| e.to_string())?;
            Ok((r, v / (r * r)))
        })
        .collect();
    let mut report = EstimateReport::new("check_c1", "c_11 finite")
        .param("measure", model.measure().kind_name())
        .param("hurst", hs)
        .param("pairs", pairs)
        .param("seed", seed)
        .param("side", side);
    let mut table = Table::new(["pair", "s", "t", "rho", "ratio", "status"]);
    let (mut min, mut max) = (f64::INFINITY, 0.0f64);
    let mut failures = 0usize;
    for (k, ((s, t), row)) in draws.iter().zip(&rows).enumerate() {
        let head = vec![Value::from(k), Value::from(format!("{s:?}")), Value::from(format!("{t:?}"))];
        let tail = match row {
            Ok((r, ratio)) => {
                min = min.min(*ratio);
                max = max.max(*ratio);
                vec![num(*r), num(*ratio), "ok".into()]
            }
            Err(msg) => {
                failures += 1;
                vec![Value::Null, Value::Null, format!("quadrature failure: {msg}").into()]
            }
        };
        table.push(head.into_iter().chain(tail).collect());
    }
    let c11 = if failures == pairs { f64::NAN } else { max.max(1.0 / min) };
    report.diag("min_ratio", num(min));
    report.diag("max_ratio", num(max));
    report.diag("c_11", num(c11));
    report.diag("failures", failures);
    report.set_estimate(c11, f64::NAN, Uncertainty::None);
    report.pass = c11.is_finite() && failures == 0;
    report.table = table;
    Ok(report)
}
