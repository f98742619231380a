use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Sample, Split};
use super::rff::RffMap;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, Rng};

/// Which target equations a trial uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Linear, cross-modal RFF and sinusoidal terms for both targets.
    S1,
    /// Each target depends on one modality only (no RFF cross terms).
    S2,
    /// Linear plus cross-modal RFF terms, no sinusoidal terms.
    S3,
    /// Same equations as S1.
    General,
}

impl Scenario {
    pub const SUITE: [Scenario; 3] = [Scenario::S1, Scenario::S2, Scenario::S3];

    pub fn has_cross_terms(self) -> bool {
        !matches!(self, Scenario::S2)
    }

    pub fn has_periodic_terms(self) -> bool {
        !matches!(self, Scenario::S3)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::S1 => "s1",
            Scenario::S2 => "s2",
            Scenario::S3 => "s3",
            Scenario::General => "general",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Scenario::S1),
            "s2" => Ok(Scenario::S2),
            "s3" => Ok(Scenario::S3),
            "general" => Ok(Scenario::General),
            other => Err(Error::Config(format!("unknown scenario {other:?}"))),
        }
    }
}

/// Frozen ground truth for one trial.
///
/// ```text
/// y1 = α1·x_num  + β1·φ(x_text) + γ1·sin(ω1·x_num)  + ε1
/// y2 = α2·x_text + β2·ψ(x_num)  + γ2·cos(ω2·x_text) + ε2
/// ```
///
/// S2 stores zero β vectors, S3 stores zero γ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub d_num: usize,
    pub d_text: usize,
    pub d_rff: usize,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub omega1: Vec<f64>,
    pub omega2: Vec<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub noise_sd: f64,
    /// Feature map applied to `x_text` in the task-1 target.
    pub phi: RffMap,
    /// Feature map applied to `x_num` in the task-2 target.
    pub psi: RffMap,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDims {
    pub d_num: usize,
    pub d_text: usize,
    pub d_rff: usize,
    pub noise_sd: f64,
}

impl Default for ScenarioDims {
    fn default() -> Self {
        ScenarioDims { d_num: 16, d_text: 16, d_rff: 32, noise_sd: 0.1 }
    }
}

fn normal_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

impl ScenarioSpec {
    pub fn sample(scenario: Scenario, seed: u64) -> Self {
        Self::sample_with(scenario, ScenarioDims::default(), seed)
    }

    /// Draws every coefficient, then zeroes the terms the scenario omits so
    /// that scenarios sharing a seed share their remaining coefficients.
    pub fn sample_with(scenario: Scenario, dims: ScenarioDims, seed: u64) -> Self {
        let mut rng = rng_from(seed, &[0x5bec]);
        let ScenarioDims { d_num, d_text, d_rff, noise_sd } = dims;
        let alpha1 = normal_vec(d_num, &mut rng);
        let alpha2 = normal_vec(d_text, &mut rng);
        let mut beta1 = normal_vec(d_rff, &mut rng);
        let mut beta2 = normal_vec(d_rff, &mut rng);
        let omega1 = normal_vec(d_num, &mut rng);
        let omega2 = normal_vec(d_text, &mut rng);
        let gamma = Uniform::new_inclusive(0.5, 1.5).expect("finite bounds");
        let mut gamma1 = gamma.sample(&mut rng);
        let mut gamma2 = gamma.sample(&mut rng);
        let phi = RffMap::sample(d_text, d_rff, &mut rng);
        let psi = RffMap::sample(d_num, d_rff, &mut rng);
        if !scenario.has_cross_terms() {
            beta1.iter_mut().for_each(|b| *b = 0.0);
            beta2.iter_mut().for_each(|b| *b = 0.0);
        }
        if !scenario.has_periodic_terms() {
            gamma1 = 0.0;
            gamma2 = 0.0;
        }
        ScenarioSpec {
            scenario,
            d_num,
            d_text,
            d_rff,
            alpha1,
            alpha2,
            beta1,
            beta2,
            omega1,
            omega2,
            gamma1,
            gamma2,
            noise_sd,
            phi,
            psi,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("alpha1", self.alpha1.len(), self.d_num),
            ("alpha2", self.alpha2.len(), self.d_text),
            ("beta1", self.beta1.len(), self.d_rff),
            ("beta2", self.beta2.len(), self.d_rff),
            ("omega1", self.omega1.len(), self.d_num),
            ("omega2", self.omega2.len(), self.d_text),
            ("phi input", self.phi.input_dim, self.d_text),
            ("phi output", self.phi.output_dim, self.d_rff),
            ("psi input", self.psi.input_dim, self.d_num),
            ("psi output", self.psi.output_dim, self.d_rff),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::Shape(format!("{name}: dimension {got}, expected {want}")));
            }
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config(format!("noise sd {} must be non-negative", self.noise_sd)));
        }
        Ok(())
    }

    /// Targets without noise.
    ///
    /// Terms the scenario omits are skipped outright rather than multiplied by
    /// zero, so coefficients stored for them are never read.
    pub fn noiseless_targets(&self, x_num: &[f64], x_text: &[f64]) -> Result<(f64, f64)> {
        if x_num.len() != self.d_num || x_text.len() != self.d_text {
            return Err(Error::Shape(format!(
                "sample dims ({}, {}) do not match spec ({}, {})",
                x_num.len(),
                x_text.len(),
                self.d_num,
                self.d_text
            )));
        }
        let mut y1 = dot(&self.alpha1, x_num);
        let mut y2 = dot(&self.alpha2, x_text);
        if self.scenario.has_cross_terms() {
            y1 += dot(&self.beta1, &self.phi.features(x_text)?);
            y2 += dot(&self.beta2, &self.psi.features(x_num)?);
        }
        if self.scenario.has_periodic_terms() {
            y1 += self.gamma1 * dot(&self.omega1, x_num).sin();
            y2 += self.gamma2 * dot(&self.omega2, x_text).cos();
        }
        Ok((y1, y2))
    }

    /// Draws `n` samples. Sample `i` uses its own substream of `seed`, so the
    /// output does not depend on generation order.
    pub fn generate(&self, n: usize, seed: u64, split: Split) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Contract("cannot generate an empty dataset".into()));
        }
        self.validate()?;
        let noise = Normal::new(0.0, self.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
        let samples = (0..n)
            .map(|i| {
                let mut rng = rng_from(seed, &[i as u64]);
                let x_num = normal_vec(self.d_num, &mut rng);
                let x_text = normal_vec(self.d_text, &mut rng);
                let (y1, y2) = self.noiseless_targets(&x_num, &x_text)?;
                let e1: f64 = noise.sample(&mut rng);
                let e2: f64 = noise.sample(&mut rng);
                Ok(Sample { x_num, x_text, y1: y1 + e1, y2: y2 + e2 })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples, split)
    }

    /// Train and test draws from independent substreams of the scenario seed.
    pub fn generate_split(&self, n_train: usize, n_test: usize) -> Result<(Dataset, Dataset)> {
        let train = self.generate(n_train, split_seed(self.seed, Split::Train), Split::Train)?;
        let test = self.generate(n_test, split_seed(self.seed, Split::Test), Split::Test)?;
        Ok((train, test))
    }
}

pub fn split_seed(seed: u64, split: Split) -> u64 {
    derive_seed(seed, &[0xda7a, split as u64])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
