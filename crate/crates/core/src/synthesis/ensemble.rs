use rayon::prelude::*;

use crate::error::{Error, Result};

use super::rng::replicate_seed;
use super::sampler::{FieldSample, Sampler};

/// Replicates drawn from one sampler; replicate `k` uses seed `base_seed ^ k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEnsemble {
    pub base_seed: u64,
    pub replicates: Vec<FieldSample>,
}

impl GaussianEnsemble {
    pub fn generate(sampler: &Sampler, d: usize, base_seed: u64, count: usize) -> Result<Self> {
        Self::generate_range(sampler, d, base_seed, 0..count)
    }

    /// Replicates with indices in `range`, so that large ensembles can be
    /// produced and analysed in batches with the same seeds as in one go.
    pub fn generate_range(
        sampler: &Sampler,
        d: usize,
        base_seed: u64,
        range: std::ops::Range<usize>,
    ) -> Result<Self> {
        let replicates = range
            .into_par_iter()
            .map(|k| sampler.draw(d, replicate_seed(base_seed, k as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            base_seed,
            replicates,
        })
    }

    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.replicates.iter().map(|r| r.seed).collect()
    }

    /// Every replicate shares grid, model, method and `d`; seeds are distinct.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.replicates.first() else {
            return Ok(());
        };
        for r in &self.replicates[1..] {
            if r.grid != first.grid || r.model != first.model || r.method != first.method || r.d != first.d {
                return Err(Error::Format("replicates differ in grid, model, method or d".into()));
            }
        }
        let mut seeds = self.seeds();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Format("replicate seeds are not distinct".into()));
        }
        Ok(())
    }
}
