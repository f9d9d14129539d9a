//! Spectral measures, the anisotropic metric and the quantities derived from
//! them by quadrature.

pub mod audits;
mod chart;
mod gauge;
mod hurst;
mod measure;
mod model;
mod profile;
pub mod radial;

pub use chart::{Ray, WarpedChart};
pub use gauge::GaugeFunction;
pub use hurst::{rho, HurstVector};
pub use measure::{
    AnisoDensity, Atom, AtomSource, ContinuousDensity, DiscreteAtoms, FbmDensity, PowerLawAtoms,
    SpectralMeasure,
};
pub use model::{QuadratureConfig, RmaxPolicy, SpectralModel};
pub use profile::Piecewise;

use crate::error::{Error, Result};
use crate::quadrature::{QuadValue, Tolerance};

/// Constant `c(H, N)` making `sigma^2(e_1) = 1` for the density
/// `c ||lambda||^{-(2H + N)}`.
pub fn fbm_normalizer(hurst: f64, n_dims: usize) -> Result<f64> {
    HurstVector::uniform(hurst, n_dims)?;
    let chart = WarpedChart::new(&vec![hurst; n_dims]);
    let unit = FbmDensity {
        hurst,
        n_dims,
        c_norm: 1.0,
    };
    let mut e1 = vec![0.0; n_dims];
    e1[0] = 1.0;
    let half = chart.integrate(true, Tolerance::relative(1e-11), |ray| {
        let w = ray.jacobian * unit.eval(&ray.coef);
        if w == 0.0 {
            return Ok(QuadValue::ZERO);
        }
        Ok(radial::one_minus_cos(&chart.phase(ray, &e1), 3.0, 0.0, f64::INFINITY, 1e-12)?.scale(w))
    })?;
    let v = 2.0 * half.value;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::NonFinite("fbm normalizer"));
    }
    Ok(1.0 / v)
}

/// Free-function form of [`SpectralModel::variogram`].
pub fn variogram(model: &SpectralModel, lag: &[f64]) -> Result<f64> {
    model.variogram(lag)
}

/// Free-function form of [`SpectralModel::covariance`].
pub fn covariance(model: &SpectralModel, s: &[f64], t: &[f64]) -> Result<f64> {
    model.covariance(s, t)
}

/// Free-function form of [`SpectralModel::cube_mass`].
pub fn cube_mass(model: &SpectralModel, center: &[f64], half_side: f64) -> Result<f64> {
    Ok(model.cube_mass(center, half_side)?.value)
}
