use serde::{Deserialize, Serialize};

use super::config::{RouteSpec, TrainConfig};
use crate::ad::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::bench::Dataset;
use crate::error::{Error, Result};
use crate::experts::{paradigm_loss_graph, ExpertBank, ModalityTransforms, Slot, NUM_SLOTS};
use crate::router::{
    entropy_graph, expected_loss_graph, gumbel_noise, gumbel_weights_graph, one_hot_weights, router_inputs,
    states_from_graph, Router, RoutingGraph, RoutingState,
};

/// Affine map between original and standardized targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: [f64; 2],
    pub sd: [f64; 2],
}

impl TargetScale {
    pub fn identity() -> Self {
        TargetScale { mean: [0.0; 2], sd: [1.0; 2] }
    }

    pub fn fit(data: &Dataset, indices: &[usize]) -> Self {
        let n = indices.len() as f64;
        let mut mean = [0.0; 2];
        let mut sd = [1.0; 2];
        for task in 0..2 {
            let vals: Vec<f64> = indices
                .iter()
                .map(|&i| {
                    let s = &data.samples()[i];
                    if task == 0 {
                        s.y1
                    } else {
                        s.y2
                    }
                })
                .collect();
            let m = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean[task] = m;
            // constant targets keep unit scale
            sd[task] = if var > 1e-12 { var.sqrt() } else { 1.0 };
        }
        TargetScale { mean, sd }
    }

    pub fn to_model(&self, task: usize, y: f64) -> f64 {
        (y - self.mean[task]) / self.sd[task]
    }

    pub fn to_original(&self, task: usize, y: f64) -> f64 {
        self.mean[task] + self.sd[task] * y
    }
}

/// How the mixture weights of a batch are produced.
#[derive(Clone, Copy, Debug)]
pub enum WeightMode {
    /// Joint routing probabilities.
    Soft,
    /// Gumbel-Softmax sample over the joint.
    Gumbel { seed: u64, epoch: usize, tau: f64, straight_through: bool },
}

/// Result of one batched forward pass.
pub struct BatchForward {
    /// n×4 output of every slot that exists in the bank.
    pub outputs: [Option<Var>; NUM_SLOTS],
    /// n×8 mixture weights (absent for single-slot models).
    pub weights: Option<Var>,
    pub routing: Option<RoutingGraph>,
    /// n×1 loss per sample, before any entropy term.
    pub sample_loss: Var,
    /// n×1 `H(π_mod) + mean H(π_task)` when routed.
    pub entropy: Option<Var>,
}

impl BatchForward {
    /// Soft mixture of slot means per row, standardized units.
    pub fn soft_means(&self, tape: &Tape) -> Vec<[f64; 2]> {
        let n = tape.value(self.sample_loss).rows();
        let weights = self.weights.map(|w| tape.value(w));
        let mut out = vec![[0.0; 2]; n];
        for (k, o) in self.outputs.iter().enumerate() {
            let Some(o) = o else { continue };
            let o = tape.value(*o);
            for (r, acc) in out.iter_mut().enumerate() {
                let w = weights.map_or(1.0, |w| w.values()[r * NUM_SLOTS + k]);
                acc[0] += w * o.values()[r * 4];
                acc[1] += w * o.values()[r * 4 + 2];
            }
        }
        out
    }
}

/// Transforms, expert bank and (optionally) router with their parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub store: ParamStore,
    pub transforms: ModalityTransforms,
    pub bank: ExpertBank,
    pub router: Option<Router>,
    pub route: RouteSpec,
    pub scale: TargetScale,
}

impl Model {
    pub fn new(config: &TrainConfig, d_num: usize, d_text: usize) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let transforms = ModalityTransforms::sample(d_num, d_text, config.seed);
        let (bank, router) = match config.route {
            RouteSpec::Fixed(slot) => {
                (ExpertBank::new(&mut store, &transforms, &config.model, config.seed, &[slot])?, None)
            }
            RouteSpec::Frozen(_) => (ExpertBank::full(&mut store, &transforms, &config.model, config.seed)?, None),
            RouteSpec::Routed => {
                let router = Router::new(&mut store, &transforms, &config.router, config.seed)?;
                (ExpertBank::full(&mut store, &transforms, &config.model, config.seed)?, Some(router))
            }
        };
        Ok(Model { store, transforms, bank, router, route: config.route, scale: TargetScale::identity() })
    }

    pub fn d_num(&self) -> usize {
        self.transforms.d_num
    }

    pub fn d_text(&self) -> usize {
        self.transforms.d_text
    }

    pub fn router_param_ids(&self) -> Vec<ParamId> {
        self.router.as_ref().map(Router::param_ids).unwrap_or_default()
    }

    pub fn expert_param_ids(&self) -> Vec<ParamId> {
        self.bank.param_ids()
    }

    fn targets(&self, tape: &mut Tape, data: &Dataset, idx: &[usize]) -> Result<[Var; 2]> {
        let n = idx.len();
        let (mut y1, mut y2) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for &i in idx {
            let s = &data.samples()[i];
            y1.push(self.scale.to_model(0, s.y1));
            y2.push(self.scale.to_model(1, s.y2));
        }
        Ok([tape.constant(Tensor::matrix(n, 1, y1)?)?, tape.constant(Tensor::matrix(n, 1, y2)?)?])
    }

    /// Records the forward pass and per-sample loss for `data[idx]`.
    pub fn forward_batch(
        &self,
        tape: &mut Tape,
        data: &Dataset,
        idx: &[usize],
        mode: WeightMode,
    ) -> Result<BatchForward> {
        if data.d_num() != self.d_num() || data.d_text() != self.d_text() {
            return Err(Error::Shape(format!(
                "dataset dims ({}, {}) do not match model dims ({}, {})",
                data.d_num(),
                data.d_text(),
                self.d_num(),
                self.d_text()
            )));
        }
        let x_num = data.x_num(idx);
        let x_text = data.x_text(idx);
        let avail = data.availability(idx);
        let [y1, y2] = self.targets(tape, data, idx)?;

        if let RouteSpec::Fixed(slot) = self.route {
            let x = tape.constant(self.transforms.apply(slot.path, &x_num, &x_text)?)?;
            let out = self.bank.forward(tape, &self.store, slot, x)?;
            let sample_loss = paradigm_loss_graph(tape, out, y1, y2)?;
            let mut outputs = [None; NUM_SLOTS];
            outputs[slot.index()] = Some(out);
            return Ok(BatchForward { outputs, weights: None, routing: None, sample_loss, entropy: None });
        }

        let inputs = router_inputs(tape, &self.transforms, &x_num, &x_text, &avail)?;
        let mut outs = [inputs.router; NUM_SLOTS];
        let mut losses = [inputs.router; NUM_SLOTS];
        for slot in Slot::all() {
            let out = self.bank.forward(tape, &self.store, slot, inputs.paths[slot.path.index()])?;
            outs[slot.index()] = out;
            losses[slot.index()] = paradigm_loss_graph(tape, out, y1, y2)?;
        }

        let (weights, routing, entropy) = match (self.route, &self.router) {
            (RouteSpec::Frozen(slot), _) => (tape.constant(one_hot_weights(idx.len(), slot))?, None, None),
            (_, Some(router)) => {
                let g = router.graph(tape, &self.store, inputs.router, &inputs.paths)?;
                tape.value(g.joint).ensure_finite("joint routing")?;
                let weights = match mode {
                    WeightMode::Soft => g.joint,
                    WeightMode::Gumbel { seed, epoch, tau, straight_through } => {
                        let noise = gumbel_noise(seed, epoch, idx);
                        gumbel_weights_graph(tape, g.log_joint, noise, tau, straight_through)?
                    }
                };
                let h = entropy_graph(tape, &g)?;
                (weights, Some(g), Some(h))
            }
            _ => return Err(Error::Contract("routed model without a router".into())),
        };
        let sample_loss = expected_loss_graph(tape, weights, &losses)?;
        Ok(BatchForward { outputs: outs.map(Some), weights: Some(weights), routing, sample_loss, entropy })
    }

    /// Routing states for `data[idx]`: learned, one-hot for frozen or fixed
    /// models.
    pub fn routing_states(&self, data: &Dataset, idx: &[usize]) -> Result<Vec<RoutingState>> {
        match (self.route, &self.router) {
            (RouteSpec::Fixed(slot) | RouteSpec::Frozen(slot), _) => Ok(vec![RoutingState::one_hot(slot); idx.len()]),
            (RouteSpec::Routed, Some(router)) => {
                let mut tape = Tape::new();
                let inputs = router_inputs(
                    &mut tape,
                    &self.transforms,
                    &data.x_num(idx),
                    &data.x_text(idx),
                    &data.availability(idx),
                )?;
                let g = router.graph(&mut tape, &self.store, inputs.router, &inputs.paths)?;
                states_from_graph(&tape, &g)
            }
            (RouteSpec::Routed, None) => Err(Error::Contract("routed model without a router".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{Scenario, ScenarioSpec, Split};

    fn small(route: RouteSpec) -> TrainConfig {
        let mut cfg = TrainConfig { route, ..TrainConfig::default() };
        cfg.model.hidden_dims = vec![8];
        cfg.model.head_dims = vec![4];
        cfg
    }

    #[test]
    fn fresh_routed_model_has_uniform_routing_and_half_squared_loss() {
        let spec = ScenarioSpec::sample(Scenario::S1, 0);
        let data = spec.generate(5, 1, Split::Train).unwrap();
        let model = Model::new(&small(RouteSpec::Routed), 16, 16).unwrap();
        let idx: Vec<usize> = (0..5).collect();
        let mut tape = Tape::new();
        let f = model.forward_batch(&mut tape, &data, &idx, WeightMode::Soft).unwrap();
        assert!(tape.value(f.weights.unwrap()).values().iter().all(|w| *w == 0.125));
        for (k, s) in data.samples().iter().enumerate() {
            let expected = 0.5 * (s.y1 * s.y1 + s.y2 * s.y2);
            assert!((tape.value(f.sample_loss).values()[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = ScenarioSpec::sample(Scenario::S1, 0);
        let data = spec.generate(3, 1, Split::Train).unwrap();
        let model = Model::new(&small(RouteSpec::Routed), 8, 16).unwrap();
        let mut tape = Tape::new();
        assert!(matches!(model.forward_batch(&mut tape, &data, &[0, 1], WeightMode::Soft), Err(Error::Shape(_))));
    }
}
