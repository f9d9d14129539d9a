//! Realizations of `X = (X_1, ..., X_d)` with independent coordinates, each a
//! copy of the scalar field with the given spectral measure.

mod covariance;
mod ensemble;
mod grid;
pub mod io;
mod linalg;
pub mod rng;
mod sampler;

pub use covariance::covariance_matrix;
pub use ensemble::GaussianEnsemble;
pub use grid::{GridSpec, MAX_GRID_POINTS};
pub use linalg::{jittered_cholesky, JITTER_LEVELS};
pub use sampler::{
    FieldSample, Method, Sampler, SamplerSpec, DEFAULT_EXACT_BUDGET, MAX_SERIES_ATOMS,
    SERIES_MASS_FRACTION,
};

use crate::error::Result;
use crate::spectral_model::SpectralModel;

/// Cholesky of the grid covariance (origin row removed, `X(0) = 0` exactly).
pub fn sample_exact(model: &SpectralModel, grid: &GridSpec, d: usize, seed: u64) -> Result<FieldSample> {
    Sampler::prepare(model, grid, &SamplerSpec::ExactCholesky { budget: None })?.draw(d, seed)
}

/// Exact sampler for one-dimensional grids through circulant embedding.
pub fn sample_circulant(model: &SpectralModel, grid: &GridSpec, d: usize, seed: u64) -> Result<FieldSample> {
    Sampler::prepare(model, grid, &SamplerSpec::Circulant)?.draw(d, seed)
}

/// `X_0(t) = Y(t) - Y(0)` with `Y` the random trigonometric series over the
/// atoms with `||n||_inf <= truncation`.
pub fn sample_discrete_series(
    model: &SpectralModel,
    truncation: Option<u32>,
    grid: &GridSpec,
    d: usize,
    seed: u64,
) -> Result<FieldSample> {
    Sampler::prepare(model, grid, &SamplerSpec::DiscreteSeries { truncation })?.draw(d, seed)
}

/// Random-feature approximation with `n_freqs` frequencies per coordinate.
pub fn sample_spectral_mc(
    model: &SpectralModel,
    n_freqs: usize,
    grid: &GridSpec,
    d: usize,
    seed: u64,
) -> Result<FieldSample> {
    Sampler::prepare(model, grid, &SamplerSpec::SpectralMc { n_freqs })?.draw(d, seed)
}

/// Field with spectral mass restricted to `a < rho(0, lambda) <= b`. Fields
/// over different bands use different substreams of the same seed.
pub fn band_field(
    model: &SpectralModel,
    a: f64,
    b: f64,
    grid: &GridSpec,
    d: usize,
    seed: u64,
) -> Result<FieldSample> {
    Sampler::prepare(model, grid, &SamplerSpec::Band { a, b, budget: None })?.draw(d, seed)
}
