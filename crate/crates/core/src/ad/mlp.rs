use rand::Rng as _;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
}

/// Fully connected network whose weights live in a [`ParamStore`].
///
/// Hidden layers use the given activation, the output layer is linear.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<Layer>,
    dims: Vec<usize>,
}

impl Mlp {
    /// Registers weights `{prefix}/l{k}/w` (out×in) and `{prefix}/l{k}/b`.
    ///
    /// Weights use Xavier-uniform scaling, biases start at zero. With
    /// `zero_output` the final layer starts at exactly zero.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        dims: &[usize],
        hidden_activation: Activation,
        zero_output: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(format!("{prefix}: an MLP needs at least input and output dims")));
        }
        if let Some(d) = dims.iter().find(|d| **d == 0) {
            return Err(Error::Config(format!("{prefix}: layer width {d} is not allowed")));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (k, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let last = k == dims.len() - 2;
            let values: Vec<f64> = if last && zero_output {
                vec![0.0; fan_in * fan_out]
            } else {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite Xavier limit");
                (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect()
            };
            let weight = store.add(format!("{prefix}/l{k}/w"), Tensor::matrix(fan_out, fan_in, values)?);
            let bias = store.add(format!("{prefix}/l{k}/b"), Tensor::zeros(&[fan_out]));
            let activation = if last { Activation::Identity } else { hidden_activation };
            layers.push(Layer { weight, bias, activation });
        }
        // keep the stream position independent of zero_output
        let _: u64 = rng.random();
        Ok(Mlp { layers, dims: dims.to_vec() })
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("validated in new")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|l| [l.weight, l.bias])
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let width = tape.value(x).cols();
        if width != self.input_dim() {
            return Err(Error::Shape(format!("MLP expects {} input features, got {width}", self.input_dim())));
        }
        let mut h = x;
        for layer in &self.layers {
            let w = tape.param(store, layer.weight)?;
            let b = tape.param(store, layer.bias)?;
            h = tape.affine(h, w, b)?;
            h = match layer.activation {
                Activation::Tanh => tape.tanh(h),
                Activation::Relu => tape.relu(h),
                Activation::Identity => h,
            };
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn zero_width_is_a_config_error() {
        let mut store = ParamStore::new();
        let err = Mlp::new(&mut store, "m", &[4, 0, 2], Activation::Tanh, false, &mut rng_from(0, &[]));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn dims_chain_and_zero_output_gives_zero() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[3, 5, 4, 2], Activation::Tanh, true, &mut rng_from(1, &[])).unwrap();
        for pair in mlp.layers().windows(2) {
            assert_eq!(store.get(pair[0].weight).rows(), store.get(pair[1].weight).cols());
        }
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 0.1, 0.2, 0.3]).unwrap()).unwrap();
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y).shape(), &[2, 2]);
        assert!(tape.value(y).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forward_is_deterministic_for_a_seed() {
        let build = || {
            let mut store = ParamStore::new();
            let mlp = Mlp::new(&mut store, "m", &[3, 8, 1], Activation::Relu, false, &mut rng_from(9, &[])).unwrap();
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::vector(vec![0.3, -0.7, 1.1])).unwrap();
            let y = mlp.forward(&mut tape, &store, x).unwrap();
            tape.value(y).values().to_vec()
        };
        assert_eq!(build(), build());
    }
}
