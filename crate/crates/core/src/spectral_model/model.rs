use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{try_integrate, QuadValue, Tolerance};

use super::chart::WarpedChart;
use super::hurst::HurstVector;
use super::measure::{ContinuousDensity, DiscreteAtoms, SpectralMeasure};
use super::profile::Piecewise;
use super::radial::{one_minus_cos, phase_square_moment, power_mass};

/// How the radial integrals treat the heavy spectral tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RmaxPolicy {
    /// Integrate to infinity: exact tail mass plus an extrapolated
    /// oscillatory remainder.
    #[default]
    Analytic,
    /// Stop each ray at the radius where the dropped mass falls below
    /// `fraction` of the ray's running integral.
    TailBound { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default)]
    pub rmax_policy: RmaxPolicy,
}

fn default_rtol() -> f64 {
    1e-6
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rtol: default_rtol(),
            rmax_policy: RmaxPolicy::Analytic,
        }
    }
}

impl QuadratureConfig {
    pub fn with_rtol(rtol: f64) -> Self {
        Self {
            rtol,
            ..Self::default()
        }
    }
}

/// Tabulated continuous part of the variogram.
#[derive(Debug)]
enum Profile {
    /// `sigma^2(h) = v * ||h||^{2H}` (fBm in any dimension, or N = 1).
    Power { v: f64, hurst: f64 },
    /// `sigma^2(h) = rho(0,h)^2 * P_s(omega)` with
    /// `omega = |h_1|^{H_1} / rho(0,h)` and `s` the sign of `h_1 h_2`.
    Planar {
        hurst: [f64; 2],
        same_sign: Piecewise,
        opposite_sign: Piecewise,
    },
    Direct,
}

type ProfileKey = (Vec<u64>, u64, u64, &'static str);

fn profile_cache() -> &'static Mutex<HashMap<ProfileKey, Arc<Profile>>> {
    static CACHE: OnceLock<Mutex<HashMap<ProfileKey, Arc<Profile>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// A spectral measure together with the anisotropic metric and quadrature
/// settings used to evaluate it.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    measure: SpectralMeasure,
    hurst: HurstVector,
    quadrature: QuadratureConfig,
    chart: Option<(ContinuousDensity, WarpedChart)>,
    profile: Arc<OnceLock<Arc<Profile>>>,
}

impl SpectralModel {
    /// Model whose metric is implied by the measure. Explicit atom lists carry
    /// no exponents; use [`SpectralModel::with_metric`] for those.
    pub fn new(measure: SpectralMeasure, quadrature: QuadratureConfig) -> Result<Self> {
        let hurst = match &measure {
            SpectralMeasure::Fbm(_) | SpectralMeasure::Aniso(_) | SpectralMeasure::Mixed(..) => {
                measure.continuous().expect("continuous part").chart_hurst()
            }
            SpectralMeasure::Discrete(d) => match d.continuum() {
                Some((p, _)) => p.hurst.clone(),
                None => {
                    return Err(Error::invalid(
                        "explicit atoms need a Hurst vector for the metric",
                    ))
                }
            },
        };
        Self::with_metric(measure, hurst, quadrature)
    }

    pub fn with_metric(
        measure: SpectralMeasure,
        hurst: HurstVector,
        quadrature: QuadratureConfig,
    ) -> Result<Self> {
        if hurst.len() != measure.dims() {
            return Err(Error::DimensionMismatch {
                expected: measure.dims(),
                got: hurst.len(),
            });
        }
        if let SpectralMeasure::Mixed(c, d) = &measure {
            if c.dims() != d.dims() {
                return Err(Error::DimensionMismatch {
                    expected: c.dims(),
                    got: d.dims(),
                });
            }
        }
        if !(quadrature.rtol > 0.0 && quadrature.rtol < 1.0) {
            return Err(Error::invalid(format!("rtol {} must lie in (0, 1)", quadrature.rtol)));
        }
        if let RmaxPolicy::TailBound { fraction } = quadrature.rmax_policy {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::invalid(format!("tail fraction {fraction} must lie in (0, 1)")));
            }
        }
        let chart = measure.continuous().map(|c| {
            let chart = WarpedChart::new(c.chart_hurst().as_slice());
            (c, chart)
        });
        Ok(Self {
            measure,
            hurst,
            quadrature,
            chart,
            profile: Arc::new(OnceLock::new()),
        })
    }

    pub fn measure(&self) -> &SpectralMeasure {
        &self.measure
    }

    pub fn hurst(&self) -> &HurstVector {
        &self.hurst
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        self.quadrature
    }

    pub fn dims(&self) -> usize {
        self.hurst.len()
    }

    /// Same measure with a different relative tolerance.
    pub fn with_rtol(&self, rtol: f64) -> Result<Self> {
        Self::with_metric(
            self.measure.clone(),
            self.hurst.clone(),
            QuadratureConfig {
                rtol,
                ..self.quadrature
            },
        )
    }

    fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        Ok(())
    }

    pub fn density_eval(&self, lambda: &[f64]) -> Result<f64> {
        self.measure.density_eval(lambda)
    }

    /// `sigma^2(h) = 2 int (1 - cos<h, lambda>) F(d lambda)`.
    pub fn variogram(&self, lag: &[f64]) -> Result<f64> {
        self.check_dims(lag)?;
        if lag.iter().all(|&x| x == 0.0) {
            return Ok(0.0);
        }
        let mut total = 0.0;
        if self.chart.is_some() {
            total += self.continuous_profiled(lag)?;
        }
        if let Some(d) = self.measure.discrete() {
            total += self.discrete_variogram(d, lag, 0.0, f64::INFINITY)?.value;
        }
        Ok(total)
    }

    /// Variogram by direct quadrature, bypassing any tabulated profile, with
    /// its error estimate.
    pub fn variogram_direct(&self, lag: &[f64]) -> Result<QuadValue> {
        self.band_variogram_with_error(lag, 0.0, f64::INFINITY)
    }

    /// Variogram of the band field whose spectrum is restricted to
    /// `a < rho(0, lambda) <= b`.
    pub fn band_variogram(&self, lag: &[f64], a: f64, b: f64) -> Result<f64> {
        Ok(self.band_variogram_with_error(lag, a, b)?.value)
    }

    pub fn band_variogram_with_error(&self, lag: &[f64], a: f64, b: f64) -> Result<QuadValue> {
        self.check_dims(lag)?;
        if !(a >= 0.0 && b > a) {
            return Err(Error::invalid(format!("band ({a}, {b}] is empty or negative")));
        }
        if lag.iter().all(|&x| x == 0.0) {
            return Ok(QuadValue::ZERO);
        }
        let mut total = QuadValue::ZERO;
        if self.chart.is_some() {
            self.require_chart_metric()?;
            total += self.continuous_direct(lag, a, b, self.quadrature.rtol)?;
        }
        if let Some(d) = self.measure.discrete() {
            total += self.discrete_variogram(d, lag, a, b)?;
        }
        Ok(total)
    }

    /// `R(s, t) = (sigma^2(s) + sigma^2(t) - sigma^2(s - t)) / 2`.
    pub fn covariance(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        self.check_dims(s)?;
        self.check_dims(t)?;
        let diff: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
        Ok(0.5 * (self.variogram(s)? + self.variogram(t)? - self.variogram(&diff)?))
    }

    fn require_chart_metric(&self) -> Result<()> {
        let (c, _) = self.chart.as_ref().expect("continuous part");
        if c.chart_hurst() != self.hurst {
            return Err(Error::invalid(
                "band restriction needs the metric exponents to match the density",
            ));
        }
        Ok(())
    }

    fn radial_tol(&self, rtol: f64) -> f64 {
        (rtol * 0.1).max(1e-13)
    }

    fn continuous_direct(&self, lag: &[f64], lo: f64, hi: f64, rtol: f64) -> Result<QuadValue> {
        let (density, chart) = self.chart.as_ref().expect("continuous part");
        let radial_tol = self.radial_tol(rtol);
        let policy = self.quadrature.rmax_policy;
        let half = chart.integrate(true, Tolerance::relative(rtol), |ray| {
            let weight = density.ray_weight(ray);
            if weight == 0.0 {
                return Ok(QuadValue::ZERO);
            }
            let phase = chart.phase(ray, lag);
            let v = match policy {
                RmaxPolicy::Analytic => one_minus_cos(&phase, 3.0, lo, hi, radial_tol)?,
                RmaxPolicy::TailBound { fraction } => {
                    truncated_ray(&phase, lo, hi, fraction, radial_tol)?
                }
            };
            Ok(v.scale(weight))
        })?;
        Ok(half.scale(2.0))
    }

    fn discrete_variogram(
        &self,
        d: &DiscreteAtoms,
        lag: &[f64],
        lo: f64,
        hi: f64,
    ) -> Result<QuadValue> {
        let h = self.hurst.as_slice();
        let banded = lo > 0.0 || hi.is_finite();
        let mut sum = 0.0;
        let mut comp = 0.0;
        d.for_each_half(d.exact_radius(), |n, w| {
            if banded {
                let r: f64 = n
                    .iter()
                    .zip(h)
                    .map(|(&k, hj)| (k.unsigned_abs() as f64).powf(*hj))
                    .sum();
                if !(r > lo && r <= hi) {
                    return;
                }
            }
            let dot: f64 = n.iter().zip(lag).map(|(&k, x)| k as f64 * x).sum();
            // Kahan summation: power-law lattices contribute many tiny terms
            let term = 4.0 * w * 2.0 * (0.5 * dot).sin().powi(2) - comp;
            let t = sum + term;
            comp = (t - sum) - term;
            sum = t;
        });
        let mut total = QuadValue::new(sum, 1e-15 * sum.abs());
        if let Some((p, chart)) = d.continuum() {
            if banded && p.hurst != self.hurst {
                return Err(Error::invalid(
                    "band restriction needs the metric exponents to match the atoms",
                ));
            }
            let edge = d.exact_radius() as f64 + 0.5;
            let q = p.tail_q();
            let radial_tol = self.radial_tol(self.quadrature.rtol);
            let tail = chart.integrate(true, Tolerance::relative(self.quadrature.rtol), |ray| {
                let start = chart.exit_radius(ray, edge).max(lo);
                if start >= hi {
                    return Ok(QuadValue::ZERO);
                }
                let phase = chart.phase(ray, lag);
                Ok(one_minus_cos(&phase, q, start, hi, radial_tol)?.scale(ray.jacobian))
            })?;
            total += tail.scale(2.0);
        }
        Ok(total)
    }

    fn profile(&self) -> Result<Arc<Profile>> {
        if let Some(p) = self.profile.get() {
            return Ok(p.clone());
        }
        let (density, _) = self.chart.as_ref().expect("continuous part");
        let key: ProfileKey = match density {
            ContinuousDensity::Fbm(f) => (
                vec![f.hurst.to_bits(), f.n_dims as u64],
                f.c_norm.to_bits(),
                self.quadrature.rtol.to_bits(),
                "fbm",
            ),
            ContinuousDensity::Aniso(a) => (
                a.hurst.as_slice().iter().map(|h| h.to_bits()).collect(),
                0,
                self.quadrature.rtol.to_bits(),
                "aniso",
            ),
        };
        let key = match self.quadrature.rmax_policy {
            RmaxPolicy::Analytic => key,
            RmaxPolicy::TailBound { fraction } => (key.0, key.1 ^ fraction.to_bits(), key.2, "tail"),
        };
        if let Some(p) = profile_cache().lock().expect("profile cache").get(&key) {
            let _ = self.profile.set(p.clone());
            return Ok(p.clone());
        }
        let built = Arc::new(self.build_profile(density)?);
        profile_cache()
            .lock()
            .expect("profile cache")
            .insert(key, built.clone());
        let _ = self.profile.set(built.clone());
        Ok(built)
    }

    fn build_profile(&self, density: &ContinuousDensity) -> Result<Profile> {
        let rtol = self.quadrature.rtol;
        let inner = (rtol * 0.1).max(1e-12);
        let n = density.dims();
        match density {
            ContinuousDensity::Fbm(f) => {
                let mut e1 = vec![0.0; n];
                e1[0] = 1.0;
                let v = self.continuous_direct(&e1, 0.0, f64::INFINITY, inner)?.value;
                Ok(Profile::Power { v, hurst: f.hurst })
            }
            ContinuousDensity::Aniso(a) if n == 1 => {
                let v = self.continuous_direct(&[1.0], 0.0, f64::INFINITY, inner)?.value;
                Ok(Profile::Power {
                    v,
                    hurst: a.hurst.as_slice()[0],
                })
            }
            ContinuousDensity::Aniso(a) if n == 2 => {
                let h = [a.hurst.as_slice()[0], a.hurst.as_slice()[1]];
                let branch = |sign: f64| {
                    Piecewise::build(
                        |w| {
                            let lag = [w.powf(1.0 / h[0]), sign * (1.0 - w).powf(1.0 / h[1])];
                            Ok(self.continuous_direct(&lag, 0.0, f64::INFINITY, inner)?.value)
                        },
                        0.0,
                        1.0,
                        rtol,
                    )
                };
                Ok(Profile::Planar {
                    hurst: h,
                    same_sign: branch(1.0)?,
                    opposite_sign: branch(-1.0)?,
                })
            }
            _ => Ok(Profile::Direct),
        }
    }

    fn continuous_profiled(&self, lag: &[f64]) -> Result<f64> {
        match &*self.profile()? {
            Profile::Power { v, hurst } => {
                let norm2: f64 = lag.iter().map(|x| x * x).sum();
                Ok(v * norm2.powf(*hurst))
            }
            Profile::Planar {
                hurst,
                same_sign,
                opposite_sign,
            } => {
                let u0 = lag[0].abs().powf(hurst[0]);
                let u1 = lag[1].abs().powf(hurst[1]);
                let r = u0 + u1;
                let w = u0 / r;
                let branch = if lag[0] * lag[1] >= 0.0 {
                    same_sign
                } else {
                    opposite_sign
                };
                Ok(r * r * branch.eval(w))
            }
            Profile::Direct => Ok(self
                .continuous_direct(lag, 0.0, f64::INFINITY, self.quadrature.rtol)?
                .value),
        }
    }

    /// `F(C(center, half_side))` for the cube of side `2 * half_side`.
    pub fn cube_mass(&self, center: &[f64], half_side: f64) -> Result<QuadValue> {
        self.check_dims(center)?;
        if !(half_side > 0.0 && half_side.is_finite()) {
            return Err(Error::invalid(format!("half_side {half_side} must be positive")));
        }
        let lo: Vec<f64> = center.iter().map(|c| c - half_side).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + half_side).collect();
        let mut total = QuadValue::ZERO;
        if let Some((density, _)) = &self.chart {
            if lo.iter().zip(&hi).all(|(a, b)| *a <= 0.0 && *b >= 0.0) {
                return Err(Error::Singular);
            }
            total += box_integral(density, &lo, &hi, self.quadrature.rtol)?;
        }
        if let Some(d) = self.measure.discrete() {
            let ilo: Vec<i64> = lo.iter().map(|x| x.ceil() as i64).collect();
            let ihi: Vec<i64> = hi.iter().map(|x| x.floor() as i64).collect();
            let mut s = 0.0;
            d.for_each_in_box(&ilo, &ihi, |_, w| s += w);
            total += QuadValue::exact(s);
        }
        Ok(total)
    }

    /// `F({rho(0, lambda) > a})`.
    pub fn tail_mass(&self, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return Err(Error::invalid(format!("tail radius {a} must be positive")));
        }
        let mut total = 0.0;
        if let Some((density, chart)) = &self.chart {
            self.require_chart_metric()?;
            total += self.angular_mass(density, chart)? * power_mass(3.0, a, f64::INFINITY);
        }
        if let Some(d) = self.measure.discrete() {
            total += self.discrete_region(d, |r| r > a, |ray_start| ray_start.max(a), None)?;
        }
        Ok(total)
    }

    /// `int_{rho(0, lambda) <= a} <t, lambda>^2 F(d lambda)`.
    pub fn square_moment(&self, t: &[f64], a: f64) -> Result<f64> {
        self.check_dims(t)?;
        if !(a > 0.0) {
            return Err(Error::invalid(format!("radius {a} must be positive")));
        }
        let mut total = 0.0;
        if let Some((density, chart)) = &self.chart {
            self.require_chart_metric()?;
            total += chart
                .integrate(true, Tolerance::relative(self.quadrature.rtol), |ray| {
                    let phase = chart.phase(ray, t);
                    let w = density.ray_weight(ray);
                    Ok(QuadValue::exact(w * phase_square_moment(&phase, 3.0, 0.0, a)))
                })?
                .value;
        }
        if let Some(d) = self.measure.discrete() {
            total += self.discrete_region(d, |r| r <= a, |s| s, Some((t, a)))?;
        }
        Ok(total)
    }

    fn angular_mass(&self, density: &ContinuousDensity, chart: &WarpedChart) -> Result<f64> {
        Ok(chart
            .integrate(true, Tolerance::relative(self.quadrature.rtol), |ray| {
                Ok(QuadValue::exact(density.ray_weight(ray)))
            })?
            .value)
    }

    /// Mass (or `<t, n>^2`-weighted mass when `moment` is given) of the atoms
    /// selected by `keep(rho)`; the power-law continuum contributes on
    /// `[start(exit), inf)` or `[exit, a]`.
    fn discrete_region<K, S>(
        &self,
        d: &DiscreteAtoms,
        keep: K,
        start: S,
        moment: Option<(&[f64], f64)>,
    ) -> Result<f64>
    where
        K: Fn(f64) -> bool,
        S: Fn(f64) -> f64,
    {
        let h = self.hurst.as_slice();
        let mut sum = 0.0;
        d.for_each_half(d.exact_radius(), |n, w| {
            let r: f64 = n
                .iter()
                .zip(h)
                .map(|(&k, hj)| (k.unsigned_abs() as f64).powf(*hj))
                .sum();
            if keep(r) {
                let factor = match moment {
                    Some((t, _)) => n.iter().zip(t).map(|(&k, x)| k as f64 * x).sum::<f64>().powi(2),
                    None => 1.0,
                };
                sum += 2.0 * w * factor;
            }
        });
        if let Some((p, chart)) = d.continuum() {
            if p.hurst != self.hurst {
                return Err(Error::invalid(
                    "radial restriction needs the metric exponents to match the atoms",
                ));
            }
            let edge = d.exact_radius() as f64 + 0.5;
            let q = p.tail_q();
            let tail = chart.integrate(true, Tolerance::relative(self.quadrature.rtol), |ray| {
                let exit = chart.exit_radius(ray, edge);
                let v = match moment {
                    None => power_mass(q, start(exit), f64::INFINITY),
                    Some((t, a)) if exit < a => {
                        phase_square_moment(&chart.phase(ray, t), q, exit, a)
                    }
                    Some(_) => 0.0,
                };
                Ok(QuadValue::exact(v * ray.jacobian))
            })?;
            // the chart already covers both mirror images
            sum += tail.value;
        }
        Ok(sum)
    }

    pub(crate) fn continuous_parts(&self) -> Option<(&ContinuousDensity, &WarpedChart)> {
        self.chart.as_ref().map(|(d, c)| (d, c))
    }
}

/// Ray integral truncated at the radius where the dropped mass is a small
/// fraction of what has been integrated.
fn truncated_ray(
    phase: &super::radial::Phase,
    lo: f64,
    hi: f64,
    fraction: f64,
    rtol: f64,
) -> Result<QuadValue> {
    let mut r_max = lo.max(1.0);
    loop {
        let v = one_minus_cos(phase, 3.0, lo, r_max.min(hi), rtol)?;
        // 1 - cos <= 2 on the dropped range
        let dropped = 2.0 * power_mass(3.0, r_max, f64::INFINITY);
        if r_max >= hi || dropped <= fraction * v.value {
            return Ok(v);
        }
        r_max *= 4.0;
    }
}

/// Integral of a continuous density over an axis-aligned box, split at the
/// coordinate hyperplanes where the density has its cusp.
fn box_integral(density: &ContinuousDensity, lo: &[f64], hi: &[f64], rtol: f64) -> Result<QuadValue> {
    let n = lo.len();
    if n > 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    let tol = Tolerance::relative(rtol).with_max_panels(4000);
    let mut point = vec![0.0; n];
    fn nested(
        density: &ContinuousDensity,
        lo: &[f64],
        hi: &[f64],
        axis: usize,
        point: &mut Vec<f64>,
        tol: Tolerance,
    ) -> Result<f64> {
        let n = lo.len();
        let mut segments = vec![(lo[axis], hi[axis])];
        if lo[axis] < 0.0 && hi[axis] > 0.0 {
            segments = vec![(lo[axis], 0.0), (0.0, hi[axis])];
        }
        let mut total = 0.0;
        for (a, b) in segments {
            let v = try_integrate(
                |x| {
                    point[axis] = x;
                    if axis + 1 == n {
                        Ok(density.eval(point))
                    } else {
                        nested(density, lo, hi, axis + 1, point, tol)
                    }
                },
                a,
                b,
                tol,
            )?;
            total += v.value;
        }
        Ok(total)
    }
    let v = nested(density, lo, hi, 0, &mut point, tol)?;
    Ok(QuadValue::new(v, rtol * v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_model::measure::{AnisoDensity, Atom, FbmDensity};

    fn brownian() -> SpectralModel {
        let f = FbmDensity::normalized(0.5, 1).unwrap();
        SpectralModel::new(SpectralMeasure::Fbm(f), QuadratureConfig::default()).unwrap()
    }

    fn aniso(h: &[f64], rtol: f64) -> SpectralModel {
        let d = AnisoDensity::new(HurstVector::new(h.to_vec()).unwrap());
        SpectralModel::new(SpectralMeasure::Aniso(d), QuadratureConfig::with_rtol(rtol)).unwrap()
    }

    fn unit_atoms() -> SpectralModel {
        let atoms = vec![
            Atom { point: vec![1], weight: 1.0 },
            Atom { point: vec![-1], weight: 1.0 },
        ];
        let d = DiscreteAtoms::explicit(1, atoms).unwrap();
        let h = HurstVector::new(vec![0.5]).unwrap();
        SpectralModel::with_metric(SpectralMeasure::Discrete(d), h, QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn brownian_variogram_and_covariance() {
        let m = brownian();
        assert!((m.variogram(&[0.3]).unwrap() - 0.3).abs() < 1e-6);
        let direct = m.variogram_direct(&[-2.5]).unwrap();
        assert!((direct.value - 2.5).abs() < 1e-5 * 2.5, "{direct:?}");
        for (s, t) in [(0.2, 0.7), (1.5, 0.4), (3.0, 3.0)] {
            let c = m.covariance(&[s], &[t]).unwrap();
            assert!((c - f64::min(s, t)).abs() < 1e-6, "{s} {t}: {c}");
        }
    }

    #[test]
    fn fbm_in_two_dimensions_is_isotropic() {
        let f = FbmDensity::normalized(0.3, 2).unwrap();
        let m = SpectralModel::new(SpectralMeasure::Fbm(f), QuadratureConfig::default()).unwrap();
        for lag in [[1.0f64, 0.0], [0.6, -0.8], [0.3, 0.4]] {
            let norm = lag[0].hypot(lag[1]);
            let v = m.variogram_direct(&lag).unwrap().value;
            assert!((v - norm.powf(0.6)).abs() < 1e-5, "{lag:?}: {v}");
        }
    }

    #[test]
    fn two_atoms_at_half_period() {
        // sigma^2(h) = 2 sum_n w (1 - cos(n h)) over n = +-1
        let m = unit_atoms();
        assert!((m.variogram(&[std::f64::consts::PI]).unwrap() - 8.0).abs() < 1e-12);
        assert!((m.variogram(&[0.5]).unwrap() - 4.0 * (1.0 - 0.5f64.cos())).abs() < 1e-12);
    }

    #[test]
    fn cube_masses() {
        let m = unit_atoms();
        assert_eq!(m.cube_mass(&[0.0], 1.5).unwrap().value, 2.0);
        assert_eq!(m.cube_mass(&[1.2], 0.5).unwrap().value, 1.0);
        // H = 1/2 in one dimension: rho^{-4} = lambda^{-2}
        let a = aniso(&[0.5], 1e-8);
        let v = a.cube_mass(&[100.0], 1.0).unwrap().value;
        let exact = 1.0 / 99.0 - 1.0 / 101.0;
        assert!((v - exact).abs() < 1e-9 * exact, "{v} vs {exact}");
        assert!(matches!(a.cube_mass(&[0.5], 1.0), Err(Error::Singular)));
    }

    #[test]
    fn brownian_tail_and_square_moment() {
        // F(d lambda) = (2 pi)^{-1} lambda^{-2} d lambda and rho = |lambda|^{1/2}
        let m = brownian();
        for a in [0.5, 2.0, 10.0] {
            let tail = m.tail_mass(a).unwrap();
            let exact = 1.0 / (std::f64::consts::PI * a * a);
            assert!((tail - exact).abs() < 1e-9 * exact, "{a}: {tail}");
            let sq = m.square_moment(&[0.7], a).unwrap();
            let exact = 0.49 * a * a / std::f64::consts::PI;
            assert!((sq - exact).abs() < 1e-9 * exact, "{a}: {sq}");
        }
    }

    #[test]
    fn bands_add_up() {
        let m = aniso(&[0.5, 1.0 / 3.0], 1e-6);
        let lag = [0.4, -0.2];
        let full = m.variogram_direct(&lag).unwrap().value;
        let cuts = [0.0, 0.5, 2.0, f64::INFINITY];
        let sum: f64 = cuts
            .windows(2)
            .map(|w| m.band_variogram(&lag, w[0], w[1]).unwrap())
            .sum();
        assert!((sum - full).abs() < 1e-5 * full, "{sum} vs {full}");
    }

    #[test]
    fn planar_profile_matches_direct() {
        let m = aniso(&[0.5, 1.0 / 3.0], 1e-4);
        for lag in [[0.5, 1.0 / 3.0], [1.0, 0.0], [0.0, -0.2], [-0.3, 0.7], [2.0, -0.01]] {
            let p = m.variogram(&lag).unwrap();
            let d = m.variogram_direct(&lag).unwrap().value;
            assert!((p - d).abs() < 1e-3 * d, "{lag:?}: {p} vs {d}");
        }
    }

    #[test]
    fn operator_self_similarity() {
        // sigma^2(c^{1/H_1} h_1, c^{1/H_2} h_2) = c^2 sigma^2(h)
        let m = aniso(&[0.5, 1.0 / 3.0], 1e-6);
        let lag = [0.3, -0.5];
        let base = m.variogram_direct(&lag).unwrap().value;
        for c in [0.5, 2.0] {
            let scaled = [lag[0] * c * c, lag[1] * c * c * c];
            let v = m.variogram_direct(&scaled).unwrap().value;
            assert!((v - c * c * base).abs() < 1e-5 * v, "{c}: {v} vs {}", c * c * base);
        }
    }
}
