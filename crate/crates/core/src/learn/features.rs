//! Stand-in camera features: a fixed random projection of task state through tanh.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureOracleConfig {
    /// Length of the task-state vector.
    pub input_dim: usize,
    /// Features per camera.
    pub feat_dim: usize,
    /// Projection entries ~ Normal(0, gain² / input_dim).
    pub gain: f64,
    pub seed: u64,
}

impl Default for FeatureOracleConfig {
    fn default() -> Self {
        FeatureOracleConfig {
            input_dim: 8,
            feat_dim: 16,
            gain: 1.0,
            seed: 0,
        }
    }
}

/// Two cameras, each `tanh(W_c x + b_c)` with its own seeded projection.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureOracle {
    pub cfg: FeatureOracleConfig,
    weights: [DMatrix<f64>; 2],
    biases: [DVector<f64>; 2],
}

impl FeatureOracle {
    /// Needs `feat_dim ≥ input_dim` so each camera map is injective.
    pub fn new(cfg: FeatureOracleConfig) -> Result<Self> {
        if cfg.input_dim == 0 || cfg.feat_dim < cfg.input_dim {
            return Err(Error::Config(format!(
                "feature oracle needs 0 < input_dim ≤ feat_dim, got {} and {}",
                cfg.input_dim, cfg.feat_dim
            )));
        }
        if !(cfg.gain.is_finite() && cfg.gain > 0.0) {
            return Err(Error::Config("feature oracle gain must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let w = Normal::new(0.0, cfg.gain / (cfg.input_dim as f64).sqrt()).expect("positive std");
        let b = Normal::new(0.0, 0.1).expect("positive std");
        let mut matrix = || DMatrix::from_fn(cfg.feat_dim, cfg.input_dim, |_, _| w.sample(&mut rng));
        let weights = [matrix(), matrix()];
        let mut vector = || DVector::from_fn(cfg.feat_dim, |_, _| b.sample(&mut rng));
        let biases = [vector(), vector()];
        Ok(FeatureOracle { cfg, weights, biases })
    }

    /// Per-camera feature vectors for one task state.
    pub fn features(&self, state: &[f64]) -> Result<[Vec<f64>; 2]> {
        if state.len() != self.cfg.input_dim {
            return Err(Error::dim(self.cfg.input_dim, state.len(), "feature oracle input"));
        }
        let x = DVector::from_column_slice(state);
        let camera = |c: usize| -> Vec<f64> { (&self.weights[c] * &x + &self.biases[c]).iter().map(|v| v.tanh()).collect() };
        Ok([camera(0), camera(1)])
    }

    /// Lipschitz constant of the two cameras' concatenated output, from the
    /// spectral norm of the stacked projections (tanh is 1-Lipschitz).
    pub fn lipschitz_bound(&self) -> f64 {
        let stacked = DMatrix::from_fn(2 * self.cfg.feat_dim, self.cfg.input_dim, |r, c| {
            self.weights[r / self.cfg.feat_dim][(r % self.cfg.feat_dim, c)]
        });
        stacked.singular_values().max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_lossy_shapes() {
        let cfg = FeatureOracleConfig {
            input_dim: 8,
            feat_dim: 4,
            ..FeatureOracleConfig::default()
        };
        assert!(FeatureOracle::new(cfg).is_err());
        let o = FeatureOracle::new(FeatureOracleConfig::default()).unwrap();
        assert!(o.features(&[0.0; 3]).is_err());
    }

    #[test]
    fn seed_selects_projection() {
        let a = FeatureOracle::new(FeatureOracleConfig::default()).unwrap();
        let b = FeatureOracle::new(FeatureOracleConfig {
            seed: 1,
            ..FeatureOracleConfig::default()
        })
        .unwrap();
        let x = [0.3; 8];
        assert_ne!(a.features(&x).unwrap(), b.features(&x).unwrap());
        assert_ne!(a.features(&x).unwrap()[0], a.features(&x).unwrap()[1]);
    }
}
