//! JSON model specification.
//!
//! ```json
//! {"measure": {"kind": "aniso", "hurst": [0.5, 0.3333333333333333]},
//!  "quadrature": {"rtol": 1e-6, "rmax_policy": {"kind": "analytic"}}}
//! ```
//!
//! Discrete measures take either explicit atoms, `[[n_1, ..., n_N], weight]`,
//! or a power law `a_n^2 = rho(0, n)^{-exponent}`. Explicit atoms carry no
//! metric, so the top-level `hurst` field is required for them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_model::{
    AnisoDensity, Atom, AtomSource, ContinuousDensity, DiscreteAtoms, FbmDensity, HurstVector,
    QuadratureConfig, SpectralMeasure, SpectralModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub measure: MeasureSpec,
    /// Metric exponents; defaults to those implied by the measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<HurstVector>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Fbm {
        hurst: f64,
        n_dims: usize,
        /// Normalizing constant; computed so that `sigma^2(e_1) = 1` if absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_norm: Option<f64>,
    },
    Aniso {
        hurst: HurstVector,
    },
    Discrete(DiscreteSpec),
    Mixed {
        continuous: Box<MeasureSpec>,
        discrete: DiscreteSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_dims: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(Vec<i64>, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_law: Option<PowerLawSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawSpec {
    pub hurst: HurstVector,
    pub exponent: f64,
    #[serde(default = "default_exact_radius")]
    pub exact_radius: u32,
}

fn default_exact_radius() -> u32 {
    64
}

impl DiscreteSpec {
    pub fn explicit(n_dims: usize, atoms: Vec<(Vec<i64>, f64)>) -> Self {
        Self {
            n_dims: Some(n_dims),
            atoms: Some(atoms),
            power_law: None,
        }
    }

    pub fn power_law(hurst: HurstVector, exponent: f64) -> Self {
        Self {
            n_dims: None,
            atoms: None,
            power_law: Some(PowerLawSpec {
                hurst,
                exponent,
                exact_radius: default_exact_radius(),
            }),
        }
    }

    fn describe(d: &DiscreteAtoms) -> Self {
        match d.source() {
            AtomSource::Explicit(atoms) => Self::explicit(
                d.dims(),
                atoms.iter().map(|a| (a.point.clone(), a.weight)).collect(),
            ),
            AtomSource::PowerLaw(p) => Self {
                n_dims: None,
                atoms: None,
                power_law: Some(PowerLawSpec {
                    hurst: p.hurst.clone(),
                    exponent: p.exponent,
                    exact_radius: p.exact_radius,
                }),
            },
        }
    }

    pub fn build(&self) -> Result<DiscreteAtoms> {
        match (&self.atoms, &self.power_law) {
            (Some(atoms), None) => {
                let n = match (self.n_dims, atoms.first()) {
                    (Some(n), _) => n,
                    (None, Some((p, _))) => p.len(),
                    (None, None) => {
                        return Err(Error::InvalidMeasure(
                            "an empty atom list needs n_dims".into(),
                        ))
                    }
                };
                let atoms = atoms
                    .iter()
                    .map(|(point, weight)| Atom {
                        point: point.clone(),
                        weight: *weight,
                    })
                    .collect();
                DiscreteAtoms::explicit(n, atoms)
            }
            (None, Some(p)) => {
                if let Some(n) = self.n_dims {
                    if n != p.hurst.len() {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            got: p.hurst.len(),
                        });
                    }
                }
                DiscreteAtoms::power_law(p.hurst.clone(), p.exponent, p.exact_radius)
            }
            _ => Err(Error::InvalidMeasure(
                "a discrete measure needs exactly one of `atoms` and `power_law`".into(),
            )),
        }
    }
}

impl MeasureSpec {
    pub fn build(&self) -> Result<SpectralMeasure> {
        Ok(match self {
            MeasureSpec::Fbm { .. } | MeasureSpec::Aniso { .. } => {
                match self.build_continuous()? {
                    ContinuousDensity::Fbm(f) => SpectralMeasure::Fbm(f),
                    ContinuousDensity::Aniso(a) => SpectralMeasure::Aniso(a),
                }
            }
            MeasureSpec::Discrete(d) => SpectralMeasure::Discrete(d.build()?),
            MeasureSpec::Mixed {
                continuous,
                discrete,
            } => SpectralMeasure::Mixed(continuous.build_continuous()?, discrete.build()?),
        })
    }

    fn describe_continuous(c: &ContinuousDensity) -> Self {
        match c {
            ContinuousDensity::Fbm(f) => MeasureSpec::Fbm {
                hurst: f.hurst,
                n_dims: f.n_dims,
                c_norm: Some(f.c_norm),
            },
            ContinuousDensity::Aniso(a) => MeasureSpec::Aniso {
                hurst: a.hurst.clone(),
            },
        }
    }

    fn build_continuous(&self) -> Result<ContinuousDensity> {
        match self {
            MeasureSpec::Fbm {
                hurst,
                n_dims,
                c_norm,
            } => Ok(ContinuousDensity::Fbm(match c_norm {
                Some(c) => FbmDensity::with_constant(*hurst, *n_dims, *c)?,
                None => FbmDensity::normalized(*hurst, *n_dims)?,
            })),
            MeasureSpec::Aniso { hurst } => Ok(ContinuousDensity::Aniso(AnisoDensity::new(hurst.clone()))),
            _ => Err(Error::InvalidMeasure(
                "the continuous part of a mixed measure must be fbm or aniso".into(),
            )),
        }
    }
}

impl ModelSpec {
    pub fn new(measure: MeasureSpec) -> Self {
        Self {
            measure,
            hurst: None,
            quadrature: QuadratureConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Spec that rebuilds `model`. Fbm constants are written out, so no
    /// normalizer is recomputed on the way back.
    pub fn describe(model: &SpectralModel) -> Self {
        let measure = match model.measure() {
            SpectralMeasure::Fbm(f) => MeasureSpec::describe_continuous(&ContinuousDensity::Fbm(f.clone())),
            SpectralMeasure::Aniso(a) => MeasureSpec::describe_continuous(&ContinuousDensity::Aniso(a.clone())),
            SpectralMeasure::Discrete(d) => MeasureSpec::Discrete(DiscreteSpec::describe(d)),
            SpectralMeasure::Mixed(c, d) => MeasureSpec::Mixed {
                continuous: Box::new(MeasureSpec::describe_continuous(c)),
                discrete: DiscreteSpec::describe(d),
            },
        };
        Self {
            measure,
            hurst: Some(model.hurst().clone()),
            quadrature: model.quadrature(),
        }
    }

    pub fn build(&self) -> Result<SpectralModel> {
        let measure = self.measure.build()?;
        match &self.hurst {
            Some(h) => SpectralModel::with_metric(measure, h.clone(), self.quadrature),
            None => SpectralModel::new(measure, self.quadrature),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_kind() {
        let aniso = r#"{"measure": {"kind": "aniso", "hurst": [0.5, 0.25]}}"#;
        let m = ModelSpec::from_json(aniso).unwrap().build().unwrap();
        assert_eq!(m.dims(), 2);

        let fbm = r#"{"measure": {"kind": "fbm", "hurst": 0.5, "n_dims": 1},
                      "quadrature": {"rtol": 1e-7, "rmax_policy": {"kind": "tail_bound", "fraction": 1e-6}}}"#;
        let spec = ModelSpec::from_json(fbm).unwrap();
        let m = spec.build().unwrap();
        assert!((m.variogram(&[2.0]).unwrap() - 2.0).abs() < 1e-5);

        let atoms = r#"{"measure": {"kind": "discrete", "atoms": [[[1], 1.0], [[-1], 1.0]]}, "hurst": [0.5]}"#;
        let m = ModelSpec::from_json(atoms).unwrap().build().unwrap();
        assert!((m.variogram(&[std::f64::consts::PI]).unwrap() - 8.0).abs() < 1e-12);

        let mixed = r#"{"measure": {"kind": "mixed",
                         "continuous": {"kind": "aniso", "hurst": [0.5]},
                         "discrete": {"power_law": {"hurst": [0.5], "exponent": 4.0}}}}"#;
        let m = ModelSpec::from_json(mixed).unwrap().build().unwrap();
        assert_eq!(m.measure().kind_name(), "mixed");
    }

    #[test]
    fn rejects_bad_specs() {
        let bad_h = r#"{"measure": {"kind": "aniso", "hurst": [1.2]}}"#;
        assert!(matches!(ModelSpec::from_json(bad_h), Err(Error::Json(_))));
        let no_metric = r#"{"measure": {"kind": "discrete", "atoms": [[[1], 1.0]]}}"#;
        assert!(ModelSpec::from_json(no_metric).unwrap().build().is_err());
        let both = r#"{"measure": {"kind": "discrete", "atoms": [],
                       "power_law": {"hurst": [0.5], "exponent": 4.0}}, "hurst": [0.5]}"#;
        assert!(ModelSpec::from_json(both).unwrap().build().is_err());
        let unknown = r#"{"measure": {"kind": "aniso", "hurst": [0.5]}, "extra": 1}"#;
        assert!(ModelSpec::from_json(unknown).is_err());
    }

    #[test]
    fn roundtrip() {
        let spec = ModelSpec {
            measure: MeasureSpec::Mixed {
                continuous: Box::new(MeasureSpec::Fbm {
                    hurst: 0.4,
                    n_dims: 2,
                    c_norm: Some(0.1),
                }),
                discrete: DiscreteSpec::explicit(2, vec![(vec![1, -2], 0.5)]),
            },
            hurst: None,
            quadrature: QuadratureConfig::with_rtol(1e-5),
        };
        let back = ModelSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn describe_rebuilds_the_same_model() {
        for text in [
            r#"{"measure": {"kind": "fbm", "hurst": 0.5, "n_dims": 1}}"#,
            r#"{"measure": {"kind": "discrete", "atoms": [[[1, 2], 1.0], [[-1, -2], 1.0], [[0, -3], 0.5]]}, "hurst": [0.5, 0.5]}"#,
            r#"{"measure": {"kind": "mixed", "continuous": {"kind": "aniso", "hurst": [0.5]},
                "discrete": {"power_law": {"hurst": [0.5], "exponent": 4.0, "exact_radius": 8}}}}"#,
        ] {
            let model = ModelSpec::from_json(text).unwrap().build().unwrap();
            let spec = ModelSpec::describe(&model);
            let again = spec.build().unwrap();
            assert_eq!(again.measure(), model.measure());
            assert_eq!(again.hurst(), model.hurst());
            assert_eq!(ModelSpec::describe(&again), spec);
        }
    }
}
