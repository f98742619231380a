use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Random Fourier feature map `x ↦ √(2/D)·cos(W x + b)`.
///
/// `W` is D×d with standard normal entries and `b` is uniform on `[0, 2π]`.
/// A map is sampled once and then shared by every sample of a trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffMap {
    pub input_dim: usize,
    pub output_dim: usize,
    /// Row-major, `output_dim × input_dim`.
    pub weights: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl RffMap {
    pub fn sample(input_dim: usize, output_dim: usize, rng: &mut Rng) -> Self {
        let weights = (0..input_dim * output_dim).map(|_| StandardNormal.sample(rng)).collect();
        let phase = Uniform::new_inclusive(0.0, 2.0 * std::f64::consts::PI).expect("finite bounds");
        let offsets = (0..output_dim).map(|_| phase.sample(rng)).collect();
        RffMap { input_dim, output_dim, weights, offsets }
    }

    pub fn from_parts(input_dim: usize, output_dim: usize, weights: Vec<f64>, offsets: Vec<f64>) -> Result<Self> {
        if weights.len() != input_dim * output_dim || offsets.len() != output_dim {
            return Err(Error::Shape(format!(
                "RFF map {output_dim}×{input_dim} given {} weights and {} offsets",
                weights.len(),
                offsets.len()
            )));
        }
        Ok(RffMap { input_dim, output_dim, weights, offsets })
    }

    /// Largest magnitude any feature can take, `√(2/D)`.
    pub fn amplitude(&self) -> f64 {
        (2.0 / self.output_dim as f64).sqrt()
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!("RFF map expects {} inputs, got {}", self.input_dim, x.len())));
        }
        let amp = self.amplitude();
        Ok(self
            .weights
            .chunks(self.input_dim)
            .zip(&self.offsets)
            .map(|(row, b)| {
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
                amp * (z + b).cos()
            })
            .collect())
    }
}
