use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anisogauss::spectral_model::{GaugeFunction, SpectralModel};
use anisogauss::synthesis::{GridSpec, SamplerSpec};
use anisogauss::ModelSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// One experiment: model, grid, sampler, seeds and the analyses to run.
/// `seed` and `replicates` have no defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub d: usize,
    pub seed: u64,
    pub replicates: usize,
    pub sampler: SamplerSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub audits: AuditSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Box dimension of each replicate's range.
    Dim {
        scales: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_r2: Option<f64>,
    },
    /// Gauge cover sums over levels, averaged over replicates.
    Cover {
        levels: Vec<u32>,
        gauge: GaugeFunction,
        /// Bound on max/min of the level means; also requires no monotone growth.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_spread: Option<f64>,
        /// Required growth factor between consecutive levels.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_growth: Option<f64>,
    },
    Sojourn {
        r_values: Vec<f64>,
        n_values: Vec<u32>,
        #[serde(default = "default_moment_bound")]
        bound: f64,
    },
    Lil {
        tau: usize,
        r_values: Vec<f64>,
        #[serde(default = "default_growth_tol")]
        growth_tol: f64,
    },
    Smallball {
        /// `(r, eps)` pairs.
        pairs: Vec<(f64, f64)>,
        #[serde(default = "default_min_r2")]
        min_r2: f64,
    },
}

fn default_moment_bound() -> f64 {
    4.0
}
fn default_growth_tol() -> f64 {
    1.5
}
fn default_min_r2() -> f64 {
    0.9
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Dim { .. } => "dim",
            EstimatorSpec::Cover { .. } => "cover",
            EstimatorSpec::Sojourn { .. } => "sojourn",
            EstimatorSpec::Lil { .. } => "lil",
            EstimatorSpec::Smallball { .. } => "smallball",
        }
    }
}

pub const ESTIMATOR_NAMES: [&str; 5] = ["dim", "cover", "sojourn", "lil", "smallball"];
pub const AUDIT_NAMES: [&str; 4] = ["c1", "c2", "spectral", "truncation"];

/// Audit parameters. Audit seeds are derived from the experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSpec {
    pub c1_pairs: usize,
    pub c2_trials: usize,
    pub c2_n_max: usize,
    /// Side of the cube conditioning points are drawn from.
    pub c2_side: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_side: Option<f64>,
    pub shells: Vec<f64>,
    pub random_directions: usize,
    pub ratio_bound: f64,
    pub a_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_values: Option<Vec<Vec<f64>>>,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self {
            c1_pairs: 200,
            c2_trials: 1000,
            c2_n_max: 8,
            c2_side: 1.0,
            half_side: None,
            shells: vec![10.0, 100.0, 1000.0],
            random_directions: 8,
            ratio_bound: 50.0,
            a_values: vec![1.0, 10.0, 100.0],
            t_values: None,
        }
    }
}

impl AuditSpec {
    /// Given `t_values`, or small multiples of each axis vector.
    pub fn t_values(&self, n_dims: usize) -> Vec<Vec<f64>> {
        if let Some(t) = &self.t_values {
            return t.clone();
        }
        let mut out = Vec::new();
        for s in [1e-4, 1e-3, 1e-2] {
            for j in 0..n_dims {
                let mut t = vec![0.0; n_dims];
                t[j] = s;
                out.push(t);
            }
        }
        out
    }
}

impl ExperimentConfig {
    /// Reads a config file, or the config recorded in a run manifest.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let value = match value.get("config") {
            Some(inner) if value.get("tool").is_some() => inner.clone(),
            _ => value,
        };
        let cfg: Self = serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Checks the invariants and builds the model.
    pub fn validate(&self) -> CliResult<SpectralModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.d == 0 {
            return Err(CliError::Config("d must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(CliError::Config("replicates must be positive".into()));
        }
        self.grid.validate()?;
        let model = self.model.build()?;
        if model.dims() != self.grid.n_dims() {
            return Err(CliError::Config(format!(
                "model has N = {} but the grid has {} axes",
                model.dims(),
                self.grid.n_dims()
            )));
        }
        let mut seen = BTreeSet::new();
        for e in &self.estimators {
            if !seen.insert(e.name()) {
                return Err(CliError::Config(format!("estimator `{}` listed twice", e.name())));
            }
        }
        Ok(model)
    }

    /// The config as recorded in manifests: no output location.
    pub fn recorded(&self) -> Self {
        Self {
            output_dir: None,
            ..self.clone()
        }
    }
}
