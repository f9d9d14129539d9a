//! Numerical audits of the spectral conditions: the cube-mass scaling
//! condition, the truncation inequalities and integrability.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::quadrature::{try_integrate, QuadValue, Tolerance};
use crate::report::{num, EstimateReport, Table, Uncertainty};

use super::chart::{Ray, WarpedChart};
use super::hurst::{rho_norm, HurstVector};
use super::measure::SpectralMeasure;
use super::model::SpectralModel;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAuditOptions {
    pub half_side: f64,
    /// Euclidean norms of the sampled cube centers.
    pub shells: Vec<f64>,
    pub random_directions: usize,
    pub seed: u64,
    /// Centers with smaller norm are reported but not used in the ratio.
    pub min_norm: f64,
    pub ratio_bound: f64,
}

impl SpectralAuditOptions {
    /// Defaults: half side 1.5 for measures with atoms (a cube must capture
    /// a lattice point), 0.5 otherwise; shells 10, 100, 1000.
    pub fn for_measure(measure: &SpectralMeasure) -> Self {
        let half_side = if measure.discrete().is_some() { 1.5 } else { 0.5 };
        Self {
            half_side,
            shells: vec![10.0, 100.0, 1000.0],
            random_directions: 8,
            seed: 0,
            min_norm: 10.0,
            ratio_bound: 50.0,
        }
    }
}

/// Unit directions: coordinate axes, diagonals (one per pair `+-d`) and
/// seeded random directions.
fn audit_directions(n: usize, random: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        out.push((format!("axis{j}"), e));
    }
    if n > 1 {
        let scale = 1.0 / (n as f64).sqrt();
        for mask in 0..1usize << (n - 1) {
            let d: Vec<f64> = (0..n)
                .map(|j| if j > 0 && mask >> (j - 1) & 1 == 1 { -scale } else { scale })
                .collect();
            out.push((format!("diag{mask}"), d));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..random {
        let mut d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter_mut().for_each(|x| *x /= norm);
        out.push((format!("random{k}"), d));
    }
    out
}

/// `g(lambda) = rho(0, lambda)^{Q+2} F(C(lambda, half_side))` over shells of
/// cube centers; PASS iff `max g / min g` stays within the bound.
pub fn spectral_condition_audit(
    model: &SpectralModel,
    h: &HurstVector,
    opts: &SpectralAuditOptions,
) -> Result<EstimateReport> {
    let n = model.dims();
    if h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.len(),
        });
    }
    if opts.shells.is_empty() {
        return Err(Error::invalid("shell list is empty"));
    }
    let lo = opts.shells.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = opts.shells.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0 && hi / lo >= 100.0 * (1.0 - 1e-12)) {
        return Err(Error::invalid("shells must be positive and span at least two decades"));
    }
    let q = h.q_exponent();
    let mut report = EstimateReport::new(
        "spectral_condition_audit",
        format!("max g / min g <= {}", opts.ratio_bound),
    )
    .param("measure", model.measure().kind_name())
    .param("hurst", h.as_slice())
    .param("half_side", opts.half_side)
    .param("shells", &opts.shells)
    .param("random_directions", opts.random_directions)
    .param("seed", opts.seed)
    .param("min_norm", opts.min_norm);
    let mut table = Table::new(["norm", "direction_id", "rho", "cube_mass", "g"]);
    let (mut g_min, mut g_max) = (f64::INFINITY, 0.0f64);
    let mut used = 0usize;
    for &shell in &opts.shells {
        for (id, dir) in audit_directions(n, opts.random_directions, opts.seed) {
            let center: Vec<f64> = dir.iter().map(|d| d * shell).collect();
            let mass = model.cube_mass(&center, opts.half_side)?.value;
            let r = rho_norm(&center, h.as_slice());
            let g = r.powf(q + 2.0) * mass;
            table.push(vec![num(shell), Value::from(id), num(r), num(mass), num(g)]);
            if shell >= opts.min_norm {
                g_min = g_min.min(g);
                g_max = g_max.max(g);
                used += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::invalid("no sampled center reaches min_norm"));
    }
    let ratio = if g_min > 0.0 { g_max / g_min } else { f64::INFINITY };
    report.diag("g_min", num(g_min));
    report.diag("g_max", num(g_max));
    report.diag("ratio", num(ratio));
    report.diag("min_over_max", num(if g_max > 0.0 { g_min / g_max } else { f64::NAN }));
    report.diag("centers", used);
    report.set_estimate(ratio, f64::NAN, Uncertainty::None);
    report.pass = ratio.is_finite() && ratio <= opts.ratio_bound;
    report.table = table;
    Ok(report)
}

/// Empirical constants of the truncation inequalities
///
/// * (i)  `int_{rho <= a} <t, lambda>^2 F <= c int (1 - cos<t, lambda>) F`
///   for pairs with `rho(0, t) a <= 1/N`,
/// * (ii) `F(rho > a) <= c a^{-2}`.
///
/// Pairs violating the precondition of (i) are skipped and listed.
pub fn truncation_audit(
    model: &SpectralModel,
    h: &HurstVector,
    a_values: &[f64],
    t_values: &[Vec<f64>],
) -> Result<EstimateReport> {
    if model.hurst() != h {
        return Err(Error::invalid(
            "truncation audit needs the model metric to equal the audited exponents",
        ));
    }
    if a_values.is_empty() {
        return Err(Error::invalid("no radii given"));
    }
    let n = model.dims() as f64;
    let mut report = EstimateReport::new("truncation_audit", "both constants finite")
        .param("measure", model.measure().kind_name())
        .param("hurst", h.as_slice())
        .param("a_values", a_values)
        .param("t_values", t_values);
    let mut table = Table::new(["inequality", "a", "t", "lhs", "rhs", "ratio", "status"]);
    let mut c_i = f64::NEG_INFINITY;
    let mut skipped = 0usize;
    for t in t_values {
        let rt = rho_norm(t, h.as_slice());
        let rhs = 0.5 * model.variogram(t)?;
        for &a in a_values {
            let t_cell = Value::from(format!("{t:?}"));
            if rt * a > 1.0 / n {
                skipped += 1;
                table.push(vec!["i".into(), num(a), t_cell, Value::Null, Value::Null, Value::Null, "skipped".into()]);
                continue;
            }
            let lhs = model.square_moment(t, a)?;
            let ratio = lhs / rhs;
            c_i = c_i.max(ratio);
            table.push(vec!["i".into(), num(a), t_cell, num(lhs), num(rhs), num(ratio), "ok".into()]);
        }
    }
    let mut c_ii = f64::NEG_INFINITY;
    for &a in a_values {
        let lhs = model.tail_mass(a)?;
        let rhs = a.powi(-2);
        let ratio = lhs / rhs;
        c_ii = c_ii.max(ratio);
        table.push(vec!["ii".into(), num(a), Value::Null, num(lhs), num(rhs), num(ratio), "ok".into()]);
    }
    if c_i == f64::NEG_INFINITY && !t_values.is_empty() {
        report.note("no (t, a) pair satisfies rho(0, t) a <= 1/N; inequality (i) not evaluated");
    }
    report.diag("c_i", num(c_i.max(0.0)));
    report.diag("c_ii", num(c_ii));
    report.diag("skipped_pairs", skipped);
    let c = c_i.max(c_ii);
    report.set_estimate(c, f64::NAN, Uncertainty::None);
    report.pass = c_i.is_finite() && c_ii.is_finite() && c_i > f64::NEG_INFINITY;
    report.table = table;
    Ok(report)
}

/// `int_{||lambda|| <= L} ||lambda||^2 / (1 + ||lambda||^2) F(d lambda)` for
/// each `L`, together with the tail constant `a^2 F(rho > a)`.
pub fn integrability_audit(
    model: &SpectralModel,
    radii: &[f64],
    tail_radii: &[f64],
) -> Result<EstimateReport> {
    let mut report = EstimateReport::new(
        "integrability_audit",
        "truncated integrals finite and nondecreasing; tail constants finite",
    )
    .param("measure", model.measure().kind_name())
    .param("radii", radii)
    .param("tail_radii", tail_radii);
    let mut table = Table::new(["kind", "radius", "value"]);
    let rtol = model.quadrature().rtol;
    let mut prev = 0.0;
    let mut ok = true;
    for &big_l in radii {
        if !(big_l > 0.0) {
            return Err(Error::invalid(format!("radius {big_l} must be positive")));
        }
        let mut v = 0.0;
        if let Some((density, chart)) = model.continuous_parts() {
            v += ball_integral(chart, big_l, rtol, |ray| (density.ray_weight(ray), 3.0, 0.0))?;
        }
        if let Some(d) = model.measure().discrete() {
            let k = d.exact_radius().min(big_l.floor() as i64);
            let mut s = 0.0;
            d.for_each_half(k, |n, w| {
                let n2: f64 = n.iter().map(|&x| (x * x) as f64).sum();
                if n2 <= big_l * big_l {
                    s += 2.0 * w * n2 / (1.0 + n2);
                }
            });
            v += s;
            if let Some((p, chart)) = d.continuum() {
                let edge = d.exact_radius() as f64 + 0.5;
                if big_l > edge {
                    let q = p.tail_q();
                    v += ball_integral(&chart, big_l, rtol, |ray| {
                        (ray.jacobian, q, chart.exit_radius(ray, edge))
                    })?;
                }
            }
        }
        ok &= v.is_finite() && v >= prev * (1.0 - 10.0 * rtol);
        prev = v;
        table.push(vec!["truncated".into(), num(big_l), num(v)]);
    }
    let mut c_ii: f64 = 0.0;
    for &a in tail_radii {
        let c = a * a * model.tail_mass(a)?;
        ok &= c.is_finite();
        c_ii = c_ii.max(c);
        table.push(vec!["tail_constant".into(), num(a), num(c)]);
    }
    report.diag("largest_truncated_integral", num(prev));
    report.diag("c_ii", num(c_ii));
    report.set_estimate(prev, rtol * prev.abs(), Uncertainty::QuadratureError);
    report.pass = ok;
    report.table = table;
    Ok(report)
}

/// `int ||lambda||^2/(1+||lambda||^2) w r^{-q} dr` over the part of each ray
/// between `start` and the Euclidean sphere of radius `big_l`. The ray
/// closure returns `(w, q, start)`.
fn ball_integral<F>(chart: &WarpedChart, big_l: f64, rtol: f64, ray_data: F) -> Result<f64>
where
    F: Fn(&Ray) -> (f64, f64, f64),
{
    let pows = chart.pows().to_vec();
    let v = chart.integrate(true, Tolerance::relative(rtol), |ray| {
        let (w, q, start) = ray_data(ray);
        if w == 0.0 {
            return Ok(QuadValue::ZERO);
        }
        let norm2 = |r: f64| -> f64 {
            ray.coef
                .iter()
                .zip(&pows)
                .map(|(c, p)| (c * r.powf(*p)).powi(2))
                .sum()
        };
        // ||lambda(r)|| increases with r: bisect in log r for the sphere
        let (mut lo, mut hi) = (1e-300f64.ln(), 0.0f64);
        while norm2(hi.exp()) < big_l * big_l {
            hi += 10.0;
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if norm2(m.exp()) < big_l * big_l {
                lo = m;
            } else {
                hi = m;
            }
        }
        let end = hi.exp();
        if start >= end {
            return Ok(QuadValue::ZERO);
        }
        let f = |s: f64| {
            let r = s.exp();
            let n2 = norm2(r);
            Ok(n2 / (1.0 + n2) * r.powf(1.0 - q))
        };
        let mut total = QuadValue::ZERO;
        let mut from = start;
        if start == 0.0 {
            // below r0 the integrand is ||lambda||^2 r^{-q} up to a factor 1 + O(||lambda||^2)
            let r0 = end * (-30.0f64).exp();
            let head: f64 = ray
                .coef
                .iter()
                .zip(&pows)
                .map(|(c, p)| {
                    let e = 1.0 + 2.0 * p - q;
                    c * c * r0.powf(e) / e
                })
                .sum();
            total += QuadValue::new(head, head * 1e-6);
            from = r0;
        }
        total += try_integrate(f, from.ln(), end.ln(), Tolerance::relative(rtol * 0.1))?;
        Ok(total.scale(w))
    })?;
    Ok(v.value)
}
