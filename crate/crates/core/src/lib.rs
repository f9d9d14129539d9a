//! Anisotropic Gaussian random fields with stationary increments: spectral
//! models, sampling, conditioning audits and fractal estimators.

pub mod config;
pub mod fractal_analysis;
pub mod error;
pub mod quadrature;
pub mod report;
pub mod sln_verify;
pub mod spectral_model;
pub mod synthesis;

pub use config::ModelSpec;
pub use error::{Error, Result};
pub use report::EstimateReport;
pub use spectral_model::{
    fbm_normalizer, rho, AnisoDensity, DiscreteAtoms, FbmDensity, GaugeFunction, HurstVector,
    SpectralMeasure, SpectralModel,
};
