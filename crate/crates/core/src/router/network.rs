use serde::{Deserialize, Serialize};

use super::gumbel::sample_gumbel;
use super::state::{RoutingMode, RoutingState};
use crate::ad::{Activation, Mlp, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::experts::{ModalityPath, ModalityTransforms, Slot, NUM_SLOTS};
use crate::rng::{rng_from, Rng};

/// Router settings (`router.*` config keys).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    pub mode: RoutingMode,
    pub tau_start: f64,
    pub tau_end: f64,
    /// Initial entropy coefficient λ₀, annealed linearly to zero over the
    /// first half of training.
    pub entropy_coef: f64,
    pub straight_through: bool,
    pub modality_hidden: Vec<usize>,
    pub task_hidden: Vec<usize>,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            mode: RoutingMode::Soft,
            tau_start: 1.0,
            tau_end: 0.1,
            entropy_coef: 0.01,
            straight_through: true,
            modality_hidden: vec![32],
            task_hidden: vec![16],
        }
    }
}

impl RouterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_start > 0.0 && self.tau_end > 0.0) {
            return Err(Error::Config("router temperatures must be positive".into()));
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(Error::Config("router.entropy_coef must be non-negative".into()));
        }
        if self.modality_hidden.iter().chain(&self.task_hidden).any(|d| *d == 0) {
            return Err(Error::Config("router layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Exponential decay from `tau_start` to `tau_end` across epochs.
    pub fn tau_at(&self, epoch: usize, epochs: usize) -> f64 {
        if epochs <= 1 {
            return self.tau_start;
        }
        let frac = epoch as f64 / (epochs - 1) as f64;
        self.tau_start * (self.tau_end / self.tau_start).powf(frac)
    }

    /// λ₀ decaying linearly to zero at the halfway epoch.
    pub fn entropy_coef_at(&self, epoch: usize, epochs: usize) -> f64 {
        let half = epochs as f64 / 2.0;
        if half <= 0.0 {
            return 0.0;
        }
        self.entropy_coef * (1.0 - epoch as f64 / half).max(0.0)
    }
}

/// Modality router over `concat(x_num, x_text, availability)` plus one task
/// router per modality path over `X^(i)`. Output layers start at zero, so a
/// fresh router is uniform.
#[derive(Clone, Debug)]
pub struct Router {
    modality: Mlp,
    task: [Mlp; 4],
}

/// Routing quantities recorded on a tape for a batch.
#[derive(Clone, Debug)]
pub struct RoutingGraph {
    pub pi_mod: Var,
    pub log_pi_mod: Var,
    pub pi_task: [Var; 4],
    pub log_pi_task: [Var; 4],
    /// n×8 joint probabilities in slot order.
    pub joint: Var,
    pub log_joint: Var,
}

impl Router {
    pub fn new(
        store: &mut ParamStore,
        transforms: &ModalityTransforms,
        config: &RouterConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from(seed, &[0x40a7e]);
        let mut dims = vec![transforms.d_num + transforms.d_text + 2];
        dims.extend_from_slice(&config.modality_hidden);
        dims.push(4);
        let modality = Mlp::new(store, "router/modality", &dims, Activation::Tanh, true, &mut rng)?;
        let mut build = |path: ModalityPath, rng: &mut Rng| -> Result<Mlp> {
            let mut dims = vec![transforms.input_dim(path)];
            dims.extend_from_slice(&config.task_hidden);
            dims.push(2);
            Mlp::new(store, &format!("router/task/{path}"), &dims, Activation::Tanh, true, rng)
        };
        let t0 = build(ModalityPath::T1, &mut rng)?;
        let t1 = build(ModalityPath::T2, &mut rng)?;
        let t2 = build(ModalityPath::N1, &mut rng)?;
        let t3 = build(ModalityPath::N2, &mut rng)?;
        Ok(Router { modality, task: [t0, t1, t2, t3] })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.modality.param_ids().chain(self.task.iter().flat_map(|m| m.param_ids())).collect()
    }

    /// Records routing for a batch. `router_input` is n×(d_num+d_text+2);
    /// `path_inputs[i]` is `X^(i)` for path index `i`.
    pub fn graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        router_input: Var,
        path_inputs: &[Var; 4],
    ) -> Result<RoutingGraph> {
        let logits = self.modality.forward(tape, store, router_input)?;
        let pi_mod = tape.softmax(logits);
        let log_pi_mod = tape.log_softmax(logits);
        let mut pi_task = [pi_mod; 4];
        let mut log_pi_task = [pi_mod; 4];
        let mut joint_parts = Vec::with_capacity(4);
        let mut log_parts = Vec::with_capacity(4);
        for i in 0..4 {
            let tl = self.task[i].forward(tape, store, path_inputs[i])?;
            pi_task[i] = tape.softmax(tl);
            log_pi_task[i] = tape.log_softmax(tl);
            let pm = tape.slice_cols(pi_mod, i, 1)?;
            joint_parts.push(tape.mul_col(pi_task[i], pm)?);
            // ln joint = ln π_mod,i + ln π_task,i,j
            let lpm = tape.slice_cols(log_pi_mod, i, 1)?;
            let both = tape.concat(&[lpm, lpm])?;
            log_parts.push(tape.add(log_pi_task[i], both)?);
        }
        let joint = tape.concat(&joint_parts)?;
        let log_joint = tape.concat(&log_parts)?;
        Ok(RoutingGraph { pi_mod, log_pi_mod, pi_task, log_pi_task, joint, log_joint })
    }

    /// Routes a single sample.
    pub fn route(
        &self,
        store: &ParamStore,
        transforms: &ModalityTransforms,
        x_num: &[f64],
        x_text: &[f64],
    ) -> Result<RoutingState> {
        let xn = Tensor::matrix(1, x_num.len(), x_num.to_vec())?;
        let xt = Tensor::matrix(1, x_text.len(), x_text.to_vec())?;
        let avail = Tensor::matrix(
            1,
            2,
            vec![
                f64::from(u8::from(x_num.iter().any(|v| *v != 0.0))),
                f64::from(u8::from(x_text.iter().any(|v| *v != 0.0))),
            ],
        )?;
        let states = self.route_batch(store, transforms, &xn, &xt, &avail)?;
        Ok(states.into_iter().next().expect("one row"))
    }

    pub fn route_batch(
        &self,
        store: &ParamStore,
        transforms: &ModalityTransforms,
        x_num: &Tensor,
        x_text: &Tensor,
        availability: &Tensor,
    ) -> Result<Vec<RoutingState>> {
        let mut tape = Tape::new();
        let inputs = router_inputs(&mut tape, transforms, x_num, x_text, availability)?;
        let g = self.graph(&mut tape, store, inputs.router, &inputs.paths)?;
        states_from_graph(&tape, &g)
    }
}

pub struct RouterInputs {
    pub router: Var,
    pub paths: [Var; 4],
}

/// Puts the router input and the four path inputs for a batch on the tape.
pub fn router_inputs(
    tape: &mut Tape,
    transforms: &ModalityTransforms,
    x_num: &Tensor,
    x_text: &Tensor,
    availability: &Tensor,
) -> Result<RouterInputs> {
    let n = x_num.rows();
    if x_text.rows() != n || availability.rows() != n || availability.cols() != 2 {
        return Err(Error::Shape("router inputs disagree on batch size".into()));
    }
    let xn = tape.constant(x_num.clone())?;
    let xt = tape.constant(x_text.clone())?;
    let av = tape.constant(availability.clone())?;
    let router = tape.concat(&[xn, xt, av])?;
    let mut paths = [router; 4];
    for path in ModalityPath::ALL {
        paths[path.index()] = tape.constant(transforms.apply(path, x_num, x_text)?)?;
    }
    Ok(RouterInputs { router, paths })
}

/// Reads per-sample [`RoutingState`]s off a recorded graph, failing on
/// non-finite probabilities.
pub fn states_from_graph(tape: &Tape, g: &RoutingGraph) -> Result<Vec<RoutingState>> {
    let pm = tape.value(g.pi_mod);
    pm.ensure_finite("modality routing")?;
    let n = pm.rows();
    (0..n)
        .map(|r| {
            let row = pm.row(r);
            let pi_mod = [row[0], row[1], row[2], row[3]];
            let pi_task = std::array::from_fn(|i| {
                let t = tape.value(g.pi_task[i]).row(r);
                [t[0], t[1]]
            });
            let mut state = RoutingState::from_probabilities(pi_mod, pi_task);
            let joint = tape.value(g.joint).row(r);
            state.joint = std::array::from_fn(|s| joint[s]);
            if state.joint.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite routing for sample {r}")));
            }
            Ok(state)
        })
        .collect()
}

/// Gumbel noise for a batch; row `r` uses the substream of
/// `(seed, epoch, sample_ids[r])`.
pub fn gumbel_noise(seed: u64, epoch: usize, sample_ids: &[usize]) -> Tensor {
    let values = sample_ids
        .iter()
        .flat_map(|&id| {
            let mut rng = rng_from(seed, &[0x6b1, epoch as u64, id as u64]);
            (0..NUM_SLOTS).map(move |_| sample_gumbel(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    Tensor::from_parts(vec![sample_ids.len(), NUM_SLOTS], values)
}

/// Relaxed (optionally straight-through) Gumbel-Softmax weights over the
/// joint, n×8.
pub fn gumbel_weights_graph(
    tape: &mut Tape,
    log_joint: Var,
    noise: Tensor,
    tau: f64,
    straight_through: bool,
) -> Result<Var> {
    let g = tape.constant(noise)?;
    let perturbed = tape.add(log_joint, g)?;
    let scaled = tape.scale(perturbed, 1.0 / tau);
    let soft = tape.softmax(scaled);
    if !straight_through {
        return Ok(soft);
    }
    let pv = tape.value(scaled);
    let mut hard = Tensor::zeros(&[pv.rows(), NUM_SLOTS]);
    for r in 0..pv.rows() {
        let best = super::state::argmax(pv.row(r));
        hard.values_mut()[r * NUM_SLOTS + best] = 1.0;
    }
    tape.straight_through(soft, hard)
}

/// Per-sample `H(π_mod) + mean_i H(π_task,i)`, n×1.
pub fn entropy_graph(tape: &mut Tape, g: &RoutingGraph) -> Result<Var> {
    let plogp = tape.mul(g.pi_mod, g.log_pi_mod)?;
    let neg_mod = tape.sum_rows(plogp);
    let mut total = neg_mod;
    for i in 0..4 {
        let t = tape.mul(g.pi_task[i], g.log_pi_task[i])?;
        let t = tape.sum_rows(t);
        let t = tape.scale(t, 0.25);
        total = tape.add(total, t)?;
    }
    Ok(tape.scale(total, -1.0))
}

/// Mixture of per-slot means for both tasks, each n×1: `Σ_s w_s · ŷ_s`.
pub fn mixture_graph(tape: &mut Tape, weights: Var, outputs: &[Var; NUM_SLOTS]) -> Result<(Var, Var)> {
    let mut acc: [Option<Var>; 2] = [None, None];
    for (s, out) in outputs.iter().enumerate() {
        let w = tape.slice_cols(weights, s, 1)?;
        for (task, col) in [(0, 0), (1, 2)] {
            let m = tape.slice_cols(*out, col, 1)?;
            let term = tape.mul(w, m)?;
            acc[task] = Some(match acc[task] {
                None => term,
                Some(a) => tape.add(a, term)?,
            });
        }
    }
    Ok((acc[0].expect("eight slots"), acc[1].expect("eight slots")))
}

/// Per-sample expected loss `Σ_s w_s · L_s`, n×1, given per-slot losses.
pub fn expected_loss_graph(tape: &mut Tape, weights: Var, slot_losses: &[Var; NUM_SLOTS]) -> Result<Var> {
    let all = tape.concat(slot_losses)?;
    let weighted = tape.mul(weights, all)?;
    Ok(tape.sum_rows(weighted))
}

/// Joint weights forced onto `slot` for every row.
pub fn one_hot_weights(n: usize, slot: Slot) -> Tensor {
    let mut t = Tensor::zeros(&[n, NUM_SLOTS]);
    for r in 0..n {
        t.values_mut()[r * NUM_SLOTS + slot.index()] = 1.0;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let cfg = RouterConfig::default();
        assert_eq!(cfg.tau_at(0, 10), 1.0);
        assert!((cfg.tau_at(9, 10) - 0.1).abs() < 1e-12);
        assert_eq!(cfg.entropy_coef_at(0, 100), 0.01);
        assert!((cfg.entropy_coef_at(25, 100) - 0.005).abs() < 1e-15);
        assert_eq!(cfg.entropy_coef_at(50, 100), 0.0);
        assert_eq!(cfg.entropy_coef_at(80, 100), 0.0);
    }

    #[test]
    fn fresh_router_is_uniform() {
        let mut store = ParamStore::new();
        let tr = ModalityTransforms::sample(3, 2, 0);
        let router = Router::new(&mut store, &tr, &RouterConfig::default(), 0).unwrap();
        let s = router.route(&store, &tr, &[0.1, 0.2, 0.3], &[1.0, -1.0]).unwrap();
        assert_eq!(s.pi_mod, [0.25; 4]);
        assert_eq!(s.pi_task, [[0.5; 2]; 4]);
        assert_eq!(s.joint, [0.125; 8]);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = RouterConfig { tau_end: 0.0, ..RouterConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = RouterConfig { entropy_coef: -1.0, ..RouterConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
