//! Shared fixtures for the benchmarks.

use anisogauss::spectral_model::{AnisoDensity, FbmDensity, HurstVector, QuadratureConfig, SpectralMeasure, SpectralModel};

pub fn brownian() -> SpectralModel {
    let f = FbmDensity::normalized(0.5, 1).expect("valid exponent");
    SpectralModel::new(SpectralMeasure::Fbm(f), QuadratureConfig::default()).expect("valid model")
}

pub fn aniso() -> (SpectralModel, HurstVector) {
    let h = HurstVector::new(vec![0.5, 1.0 / 3.0]).expect("valid exponents");
    let m = SpectralModel::new(SpectralMeasure::Aniso(AnisoDensity::new(h.clone())), QuadratureConfig::with_rtol(1e-4))
        .expect("valid model");
    (m, h)
}
