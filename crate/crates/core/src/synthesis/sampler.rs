use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::ModelSpec;
use crate::error::{Error, Result};
use crate::spectral_model::{AtomSource, ContinuousDensity, DiscreteAtoms, SpectralModel, WarpedChart};
use crate::quadrature::{QuadValue, Tolerance};
use crate::spectral_model::radial::power_mass;

use super::covariance::grid_covariance;
use super::grid::GridSpec;
use super::linalg::jittered_cholesky;
use super::rng::substream_rng;

pub const DEFAULT_EXACT_BUDGET: usize = 4096;
/// Lattice points a discrete series may use.
pub const MAX_SERIES_ATOMS: usize = 1 << 22;
/// Truncated-mass fraction targeted by the default series truncation.
pub const SERIES_MASS_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactCholesky,
    Circulant,
    DiscreteSeries,
    SpectralMc,
    Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    ExactCholesky {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<usize>,
    },
    /// Davies-Harte embedding of the increments; one-dimensional grids only.
    Circulant,
    DiscreteSeries {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<u32>,
    },
    SpectralMc {
        n_freqs: usize,
    },
    Band {
        a: f64,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<usize>,
    },
}

impl SamplerSpec {
    pub fn method(&self) -> Method {
        match self {
            SamplerSpec::ExactCholesky { .. } => Method::ExactCholesky,
            SamplerSpec::Circulant => Method::Circulant,
            SamplerSpec::DiscreteSeries { .. } => Method::DiscreteSeries,
            SamplerSpec::SpectralMc { .. } => Method::SpectralMc,
            SamplerSpec::Band { .. } => Method::Band,
        }
    }
}

/// One realization of `X = (X_1, ..., X_d)` on a grid. `values` is
/// point-major: coordinate `i` at flat point `p` is `values[p * d + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid: GridSpec,
    pub d: usize,
    pub values: Vec<f64>,
    pub model: Arc<ModelSpec>,
    pub seed: u64,
    pub method: Method,
}

impl FieldSample {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, point: usize) -> &[f64] {
        &self.values[point * self.d..(point + 1) * self.d]
    }

    pub fn coordinate(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(i).step_by(self.d).copied()
    }

    /// The field that vanishes everywhere.
    pub fn zero(grid: GridSpec, d: usize, model: Arc<ModelSpec>, seed: u64, method: Method) -> Self {
        Self {
            values: vec![0.0; grid.len() * d],
            grid,
            d,
            model,
            seed,
            method,
        }
    }
}

#[derive(Clone)]
enum Kind {
    Zero,
    Cholesky {
        /// Lower factor for the non-origin points.
        l: DMatrix<f64>,
        tag: u32,
    },
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Series {
        /// `(n, sqrt(2 w_n))` over the stored half of the lattice.
        atoms: Vec<(Vec<i64>, f64)>,
    },
    SpectralMc {
        density: ContinuousDensity,
        chart: WarpedChart,
        n_freqs: usize,
        /// Proposal `p(r)`: `alpha r^{alpha-1} / 2` on (0,1), `beta r^{-beta-1} / 2` beyond.
        alpha: f64,
        beta: f64,
    },
}

/// A sampler with its setup work (factorizations, embeddings, atom lists)
/// done once; [`Sampler::draw`] only consumes randomness.
#[derive(Clone)]
pub struct Sampler {
    spec: SamplerSpec,
    grid: GridSpec,
    model: Arc<ModelSpec>,
    kind: Kind,
    diagnostics: Map<String, Value>,
}

impl std::fmt::Debug for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sampler")
            .field("spec", &self.spec)
            .field("grid", &self.grid)
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

impl Sampler {
    pub fn prepare(model: &SpectralModel, grid: &GridSpec, spec: &SamplerSpec) -> Result<Self> {
        grid.validate()?;
        if grid.n_dims() != model.dims() {
            return Err(Error::DimensionMismatch {
                expected: model.dims(),
                got: grid.n_dims(),
            });
        }
        let mut diagnostics = Map::new();
        let kind = match spec {
            SamplerSpec::ExactCholesky { budget } => {
                let (l, eps) = cholesky_route(grid, budget.unwrap_or(DEFAULT_EXACT_BUDGET), |h| {
                    model.variogram(h)
                })?;
                diagnostics.insert("jitter".into(), eps.into());
                Kind::Cholesky { l, tag: 0 }
            }
            SamplerSpec::Circulant => {
                let (sqrt_eig, fft, clipped) = circulant_route(model, grid)?;
                diagnostics.insert("clipped_eigenvalue".into(), clipped.into());
                Kind::Circulant { sqrt_eig, fft }
            }
            SamplerSpec::DiscreteSeries { truncation } => {
                let d = model.measure().discrete().ok_or(Error::Variant {
                    op: "sample_discrete_series",
                    variant: model.measure().kind_name(),
                })?;
                let (atoms, k, fraction) = series_atoms(d, *truncation)?;
                diagnostics.insert("truncation".into(), k.into());
                diagnostics.insert("atoms".into(), atoms.len().into());
                diagnostics.insert(
                    "truncated_mass_fraction".into(),
                    fraction.map_or(Value::Null, Value::from),
                );
                if model.measure().continuous().is_some() {
                    diagnostics.insert(
                        "warning".into(),
                        "the continuous part of the measure is not synthesized".into(),
                    );
                }
                if atoms.is_empty() {
                    Kind::Zero
                } else {
                    Kind::Series { atoms }
                }
            }
            SamplerSpec::SpectralMc { n_freqs } => {
                if *n_freqs == 0 {
                    return Err(Error::invalid("spectral synthesis needs at least one frequency"));
                }
                if model.measure().discrete().is_some() {
                    return Err(Error::Variant {
                        op: "sample_spectral_mc",
                        variant: model.measure().kind_name(),
                    });
                }
                let (density, chart) = model.continuous_parts().expect("continuous measure");
                let h_max = density.chart_hurst().max();
                Kind::SpectralMc {
                    density: density.clone(),
                    chart: chart.clone(),
                    n_freqs: *n_freqs,
                    alpha: 2.0 / h_max - 2.0,
                    beta: 2.0,
                }
            }
            SamplerSpec::Band { a, b, budget } => {
                if !(*a > 0.0 && a < b) {
                    return Err(Error::invalid(format!("band needs 0 < a < b, got ({a}, {b})")));
                }
                let band = |h: &[f64]| model.band_variogram(h, *a, *b);
                let mut top: f64 = 0.0;
                for j in 0..grid.n_dims() {
                    let mut e = vec![0.0; grid.n_dims()];
                    e[j] = 1.0;
                    top = top.max(band(&e)?);
                }
                let corner = vec![1.0; grid.n_dims()];
                top = top.max(band(&corner)?);
                if top == 0.0 {
                    diagnostics.insert("warning".into(), "band carries no spectral mass".into());
                    Kind::Zero
                } else {
                    let (l, eps) = cholesky_route(grid, budget.unwrap_or(DEFAULT_EXACT_BUDGET), band)?;
                    diagnostics.insert("jitter".into(), eps.into());
                    Kind::Cholesky {
                        l,
                        tag: band_tag(*a, *b),
                    }
                }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            grid: grid.clone(),
            model: Arc::new(ModelSpec::describe(model)),
            kind,
            diagnostics,
        })
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn model(&self) -> &Arc<ModelSpec> {
        &self.model
    }

    pub fn diagnostics(&self) -> &Map<String, Value> {
        &self.diagnostics
    }

    pub fn draw(&self, d: usize, seed: u64) -> Result<FieldSample> {
        Ok(FieldSample {
            values: self.draw_values(d, seed)?,
            grid: self.grid.clone(),
            d,
            model: self.model.clone(),
            seed,
            method: self.spec.method(),
        })
    }

    /// Point-major values of one realization.
    pub fn draw_values(&self, d: usize, seed: u64) -> Result<Vec<f64>> {
        if d == 0 {
            return Err(Error::invalid("codomain dimension d must be positive"));
        }
        let n = self.grid.len();
        let mut out = vec![0.0; n * d];
        for i in 0..d {
            match &self.kind {
                Kind::Zero => {}
                Kind::Cholesky { l, tag } => {
                    let mut rng = substream_rng(seed, *tag, i);
                    let z: Vec<f64> = (0..l.nrows()).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let x = lower_mul(l, &z);
                    for (p, v) in x.iter().enumerate() {
                        out[(p + 1) * d + i] = *v;
                    }
                }
                Kind::Circulant { sqrt_eig, fft } => {
                    let mut rng = substream_rng(seed, 0, i);
                    let mut buf: Vec<Complex<f64>> = sqrt_eig
                        .iter()
                        .map(|s| {
                            let re: f64 = StandardNormal.sample(&mut rng);
                            let im: f64 = StandardNormal.sample(&mut rng);
                            Complex::new(s * re, s * im)
                        })
                        .collect();
                    fft.process(&mut buf);
                    let mut acc = 0.0;
                    for p in 1..n {
                        acc += buf[p - 1].re;
                        out[p * d + i] = acc;
                    }
                }
                Kind::Series { atoms } => {
                    let mut rng = substream_rng(seed, 0, i);
                    let mut waves = Waves::new(&self.grid);
                    for (point, c) in atoms {
                        let xi: f64 = StandardNormal.sample(&mut rng);
                        let eta: f64 = StandardNormal.sample(&mut rng);
                        let lambda: Vec<f64> = point.iter().map(|&k| k as f64).collect();
                        waves.add(&lambda, c * xi, c * eta, &mut out, d, i);
                    }
                }
                Kind::SpectralMc {
                    density,
                    chart,
                    n_freqs,
                    alpha,
                    beta,
                } => {
                    let mut rng = substream_rng(seed, 0, i);
                    let mut waves = Waves::new(&self.grid);
                    let nd = self.grid.n_dims();
                    let simplex_density: f64 = (1..nd).map(|k| k as f64).product();
                    let sign_prob = 0.5f64.powi(nd as i32);
                    for _ in 0..*n_freqs {
                        let signs: Vec<f64> = (0..nd)
                            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                            .collect();
                        let mut omega: Vec<f64> = (0..nd).map(|_| Exp1.sample(&mut rng)).collect();
                        let total: f64 = omega.iter().sum();
                        omega.iter_mut().for_each(|w| *w /= total);
                        let u: f64 = rng.random();
                        let (r, p) = if u < 0.5 {
                            let r = (2.0 * u).powf(1.0 / alpha).max(f64::MIN_POSITIVE);
                            (r, 0.5 * alpha * r.powf(alpha - 1.0))
                        } else {
                            let r = (2.0 * (1.0 - u)).powf(-1.0 / beta);
                            (r, 0.5 * beta * r.powf(-beta - 1.0))
                        };
                        let xi: f64 = StandardNormal.sample(&mut rng);
                        let eta: f64 = StandardNormal.sample(&mut rng);
                        let ray = chart.ray(&omega, &signs);
                        let q = sign_prob * simplex_density * p;
                        let w = density.ray_weight(&ray) * r.powi(-3) / (*n_freqs as f64 * q);
                        if !(w.is_finite() && w > 0.0) {
                            continue;
                        }
                        let lambda = chart.point(&ray, r);
                        let c = w.sqrt();
                        waves.add(&lambda, c * xi, c * eta, &mut out, d, i);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn band_tag(a: f64, b: f64) -> u32 {
    let x = a.to_bits() ^ b.to_bits().rotate_left(29);
    ((x >> 32) ^ x) as u32 | 1
}

fn cholesky_route<V>(grid: &GridSpec, budget: usize, variogram: V) -> Result<(DMatrix<f64>, f64)>
where
    V: Fn(&[f64]) -> Result<f64> + Sync,
{
    if grid.len() > budget {
        return Err(Error::Budget {
            what: "exact sampler grid points",
            needed: grid.len(),
            limit: budget,
        });
    }
    let k = grid_covariance(grid, variogram)?;
    let (c, eps) = jittered_cholesky(&k)?;
    Ok((c.unpack(), eps))
}

/// `x = L z` for lower-triangular `L` stored column-major.
fn lower_mul(l: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut x = vec![0.0; n];
    for j in 0..n {
        let col = &l.as_slice()[j * n..(j + 1) * n];
        let zj = z[j];
        for (xi, lij) in x[j..].iter_mut().zip(&col[j..]) {
            *xi += lij * zj;
        }
    }
    x
}

/// Davies-Harte: circulant embedding of the increment autocovariance.
fn circulant_route(model: &SpectralModel, grid: &GridSpec) -> Result<(Vec<f64>, Arc<dyn Fft<f64>>, f64)> {
    if grid.n_dims() != 1 {
        return Err(Error::UnsupportedDimension(grid.n_dims()));
    }
    let n = grid.len() - 1;
    let delta = grid.spacing(0);
    let var = |k: usize| model.variogram(&[k as f64 * delta]);
    let mut v = Vec::with_capacity(n + 2);
    for k in 0..=n + 1 {
        v.push(var(k)?);
    }
    let gamma: Vec<f64> = (0..=n)
        .map(|k| {
            let below = if k == 0 { v[1] } else { v[k - 1] };
            0.5 * (v[k + 1] + below - 2.0 * v[k])
        })
        .collect();
    let size = 2 * n;
    let mut c: Vec<Complex<f64>> = (0..size)
        .map(|j| Complex::new(gamma[j.min(size - j)], 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut c);
    let top = c.iter().map(|z| z.re).fold(0.0, f64::max);
    let worst = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if worst < -1e-10 * top {
        return Err(Error::NotPsd {
            worst_eigenvalue: worst,
        });
    }
    let sqrt_eig = c.iter().map(|z| (z.re.max(0.0) / size as f64).sqrt()).collect();
    Ok((sqrt_eig, fft, worst.min(0.0)))
}

/// Adds `a (cos<lambda, t> - 1) + b sin<lambda, t>` over a grid using
/// per-axis phasor tables.
struct Waves {
    axes: Vec<Vec<f64>>,
    tables: Vec<Vec<Complex<f64>>>,
}

impl Waves {
    fn new(grid: &GridSpec) -> Self {
        let axes: Vec<Vec<f64>> = (0..grid.n_dims()).map(|j| grid.axis(j)).collect();
        let tables = axes.iter().map(|a| vec![Complex::new(1.0, 0.0); a.len()]).collect();
        Self { axes, tables }
    }

    fn add(&mut self, lambda: &[f64], a: f64, b: f64, out: &mut [f64], d: usize, coord: usize) {
        for ((table, axis), &l) in self.tables.iter_mut().zip(&self.axes).zip(lambda) {
            for (z, &t) in table.iter_mut().zip(axis) {
                let (s, c) = (l * t).sin_cos();
                *z = Complex::new(c, s);
            }
        }
        let nd = self.axes.len();
        let inner = &self.tables[nd - 1];
        let m_last = inner.len();
        let outer: usize = self.axes[..nd - 1].iter().map(Vec::len).product();
        let mut idx = vec![0usize; nd - 1];
        for o in 0..outer {
            let z0 = idx
                .iter()
                .enumerate()
                .fold(Complex::new(1.0, 0.0), |acc, (j, &i)| acc * self.tables[j][i]);
            let base = o * m_last;
            for (k, zl) in inner.iter().enumerate() {
                let z = z0 * zl;
                out[(base + k) * d + coord] += a * (z.re - 1.0) + b * z.im;
            }
            for j in (0..nd - 1).rev() {
                idx[j] += 1;
                if idx[j] < self.axes[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }
}

/// Atoms with `||n||_inf <= K` as `(n, sqrt(2 w_n))`, the truncation `K`
/// and the truncated mass fraction when it is computable.
fn series_atoms(d: &DiscreteAtoms, truncation: Option<u32>) -> Result<(Vec<(Vec<i64>, f64)>, i64, Option<f64>)> {
    let mass_within = |k: i64| -> f64 {
        let mut s = 0.0;
        d.for_each_half(k, |_, w| s += 2.0 * w);
        s
    };
    let count = |k: i64| (2 * k as usize + 1).saturating_pow(d.dims() as u32);
    let total = match d.source() {
        AtomSource::Explicit(_) => Some(mass_within(d.support_radius().unwrap_or(0))),
        AtomSource::PowerLaw(_) => Some(mass_within(d.exact_radius()) + continuum_mass(d)?),
    };
    let k = match truncation {
        Some(k) => k as i64,
        None => match d.source() {
            AtomSource::Explicit(_) => d.support_radius().unwrap_or(0),
            AtomSource::PowerLaw(_) => {
                let total = total.expect("power-law total");
                let enough = |k: i64| mass_within(k) >= (1.0 - SERIES_MASS_FRACTION) * total;
                let mut hi = 1i64;
                while !enough(hi) {
                    hi *= 2;
                    if count(hi) > MAX_SERIES_ATOMS {
                        return Err(Error::Budget {
                            what: "series atoms for the default truncation",
                            needed: count(hi),
                            limit: MAX_SERIES_ATOMS,
                        });
                    }
                }
                let mut lo = hi / 2;
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if enough(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        },
    };
    if count(k) > MAX_SERIES_ATOMS {
        return Err(Error::Budget {
            what: "series atoms",
            needed: count(k),
            limit: MAX_SERIES_ATOMS,
        });
    }
    let mut atoms = Vec::new();
    d.for_each_half(k, |n, w| {
        if w > 0.0 {
            atoms.push((n.to_vec(), (2.0 * w).sqrt()));
        }
    });
    let within = mass_within(k);
    let fraction = total.filter(|t| *t > 0.0).map(|t| ((t - within) / t).max(0.0));
    Ok((atoms, k, fraction))
}

/// Mass of the power-law continuum outside the exactly summed box.
fn continuum_mass(d: &DiscreteAtoms) -> Result<f64> {
    let Some((p, chart)) = d.continuum() else {
        return Ok(0.0);
    };
    let edge = d.exact_radius() as f64 + 0.5;
    let q = p.tail_q();
    let v = chart.integrate(true, Tolerance::relative(1e-8), |ray| {
        Ok(QuadValue::exact(
            ray.jacobian * power_mass(q, chart.exit_radius(ray, edge), f64::INFINITY),
        ))
    })?;
    Ok(v.value)
}
