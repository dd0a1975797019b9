use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroupStructure, GroupedDesign, GroupedVector};

/// Per-group nonzero counts of the reference benchmark.
pub const REFERENCE_SPARSITY: [usize; 6] = [10, 8, 6, 4, 2, 1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub m: usize,
    pub d_per_group: usize,
    /// Ground-truth nonzeros per group.
    pub s: Vec<usize>,
    pub noise_variance: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 200,
            m: 10,
            d_per_group: 10,
            s: default_sparsity(10, 10),
            noise_variance: 4.0,
            seed: 0,
        }
    }
}

/// `10, 8, 6, 4, 2, 1` followed by zeros, truncated to `m` groups and capped
/// at the group size.
pub fn default_sparsity(m: usize, d_per_group: usize) -> Vec<usize> {
    (0..m)
        .map(|i| REFERENCE_SPARSITY.get(i).copied().unwrap_or(0).min(d_per_group))
        .collect()
}

impl SyntheticConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.d_per_group == 0 {
            return Err(Error::arg("n, m and the group size must be positive"));
        }
        if self.s.len() != self.m {
            return Err(Error::arg(format!(
                "{} sparsity levels given for {} groups",
                self.s.len(),
                self.m
            )));
        }
        if let Some(&s) = self.s.iter().find(|&&s| s > self.d_per_group) {
            return Err(Error::arg(format!(
                "sparsity {s} exceeds the group size {}",
                self.d_per_group
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::arg("noise variance must be nonnegative"));
        }
        Ok(())
    }
}

/// Gaussian design, ±1 ground truth on random supports and Gaussian noise.
///
/// Draw order is fixed (design column by column, then supports and signs
/// group by group, then noise) so a seed pins the whole instance.
pub fn gen_synthetic(config: &SyntheticConfig) -> Result<(GroupedDesign, GroupedVector)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (n, d) = (config.n, config.d_per_group);

    let groups: Vec<DMatrix<f64>> = (0..config.m)
        .map(|_| DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng)))
        .collect();

    let structure = GroupStructure::uniform(config.m, d)?;
    let mut truth = GroupedVector::zeros(&structure);
    for (i, &s) in config.s.iter().enumerate() {
        let block = truth.block_mut(i);
        for j in sample(&mut rng, d, s).into_iter() {
            block[j] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        }
    }

    let noise = Normal::new(0.0, config.noise_variance.sqrt())
        .map_err(|e| Error::arg(e.to_string()))?;
    let mut y = DVector::from_fn(n, |_, _| noise.sample(&mut rng));
    for (g, x) in groups.iter().zip(truth.blocks()) {
        y.gemv(1.0, g, &DVector::from_column_slice(x), 1.0);
    }

    Ok((GroupedDesign::new(groups, y)?, truth))
}
