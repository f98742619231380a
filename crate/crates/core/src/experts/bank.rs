use serde::{Deserialize, Serialize};

use super::loss::ExpertOutput;
use super::paths::{ModalityTransforms, Slot, TaskParadigm, NUM_SLOTS};
use crate::ad::{Activation, Mlp, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Expert architecture (`model.*` config keys).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertConfig {
    /// Encoder widths. STL builds one encoder per task, MTL shares one.
    pub hidden_dims: Vec<usize>,
    /// Hidden widths of each task head; heads end in (mean, log-variance).
    pub head_dims: Vec<usize>,
    /// Log-variances are squashed into (−clamp, clamp).
    pub logvar_clamp: f64,
    pub activation: Activation,
    /// Freeze log-variances at 0, turning the loss into half squared error.
    pub homoscedastic: bool,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig {
            hidden_dims: vec![64, 64],
            head_dims: vec![32],
            logvar_clamp: 6.0,
            activation: Activation::Tanh,
            homoscedastic: false,
        }
    }
}

impl ExpertConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() {
            return Err(Error::Config("model.hidden_dims must name at least one layer".into()));
        }
        if self.hidden_dims.iter().chain(&self.head_dims).any(|d| *d == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(self.logvar_clamp > 0.0 && self.logvar_clamp.is_finite()) {
            return Err(Error::Config(format!("model.logvar_clamp {} must be positive", self.logvar_clamp)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Tower {
    encoder: Mlp,
    head: Mlp,
}

#[derive(Clone, Debug)]
enum Net {
    /// Disjoint (encoder, head) per task.
    Stl([Tower; 2]),
    /// One encoder feeding both heads.
    Mtl { encoder: Mlp, heads: [Mlp; 2] },
}

/// One expert slot: produces (ŷ₁, log σ₁², ŷ₂, log σ₂²) for each input row.
#[derive(Clone, Debug)]
pub struct Expert {
    slot: Slot,
    input_dim: usize,
    net: Net,
    activation: Activation,
    logvar_clamp: f64,
    homoscedastic: bool,
}

impl Expert {
    pub fn new(store: &mut ParamStore, slot: Slot, input_dim: usize, config: &ExpertConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from(seed, &[0xe4, slot.index() as u64]);
        let prefix = format!("expert/{}/{}", slot.path, slot.paradigm);
        let mut enc_dims = vec![input_dim];
        enc_dims.extend_from_slice(&config.hidden_dims);
        let latent = *enc_dims.last().expect("non-empty");
        let mut head_dims = vec![latent];
        head_dims.extend_from_slice(&config.head_dims);
        head_dims.push(2);
        let act = config.activation;

        let net = match slot.paradigm {
            TaskParadigm::Stl => {
                let mut tower = |k: usize| -> Result<Tower> {
                    let encoder =
                        Mlp::new(store, &format!("{prefix}/task{}/encoder", k + 1), &enc_dims, act, false, &mut rng)?;
                    let head =
                        Mlp::new(store, &format!("{prefix}/task{}/head", k + 1), &head_dims, act, true, &mut rng)?;
                    Ok(Tower { encoder, head })
                };
                let first = tower(0)?;
                Net::Stl([first, tower(1)?])
            }
            TaskParadigm::Mtl => {
                let encoder = Mlp::new(store, &format!("{prefix}/shared"), &enc_dims, act, false, &mut rng)?;
                let h1 = Mlp::new(store, &format!("{prefix}/head1"), &head_dims, act, true, &mut rng)?;
                let h2 = Mlp::new(store, &format!("{prefix}/head2"), &head_dims, act, true, &mut rng)?;
                Net::Mtl { encoder, heads: [h1, h2] }
            }
        };
        Ok(Expert {
            slot,
            input_dim,
            net,
            activation: act,
            logvar_clamp: config.logvar_clamp,
            homoscedastic: config.homoscedastic,
        })
    }

    pub fn slot(&self) -> Slot {
        self.slot
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        match &self.net {
            Net::Stl(towers) => towers.iter().flat_map(|t| t.encoder.param_ids().chain(t.head.param_ids())).collect(),
            Net::Mtl { encoder, heads } => {
                encoder.param_ids().chain(heads.iter().flat_map(|h| h.param_ids())).collect()
            }
        }
    }

    /// Parameters that only influence task `task` (0 or 1). Empty for MTL
    /// encoders, which influence both.
    pub fn task_param_ids(&self, task: usize) -> Vec<ParamId> {
        match &self.net {
            Net::Stl(towers) => towers[task].encoder.param_ids().chain(towers[task].head.param_ids()).collect(),
            Net::Mtl { heads, .. } => heads[task].param_ids().collect(),
        }
    }

    pub fn shared_param_ids(&self) -> Vec<ParamId> {
        match &self.net {
            Net::Stl(_) => Vec::new(),
            Net::Mtl { encoder, .. } => encoder.param_ids().collect(),
        }
    }

    fn encode(&self, tape: &mut Tape, store: &ParamStore, encoder: &Mlp, x: Var) -> Result<Var> {
        let h = encoder.forward(tape, store, x)?;
        Ok(match self.activation {
            Activation::Tanh => tape.tanh(h),
            Activation::Relu => tape.relu(h),
            Activation::Identity => h,
        })
    }

    /// Splits a head output (n×2) into mean and bounded log-variance.
    fn finish_head(&self, tape: &mut Tape, raw: Var) -> Result<[Var; 2]> {
        let mean = tape.slice_cols(raw, 0, 1)?;
        let logvar = if self.homoscedastic {
            let n = tape.value(raw).rows();
            tape.constant(Tensor::zeros(&[n, 1]))?
        } else {
            let s = tape.slice_cols(raw, 1, 1)?;
            tape.soft_clamp(s, self.logvar_clamp)
        };
        Ok([mean, logvar])
    }

    /// Batched forward pass; returns n×4 columns (ŷ₁, log σ₁², ŷ₂, log σ₂²).
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        if tape.value(x).cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "expert {} expects {} inputs, got {}",
                self.slot,
                self.input_dim,
                tape.value(x).cols()
            )));
        }
        let raw = match &self.net {
            Net::Stl(towers) => {
                let mut outs = [x; 2];
                for (k, t) in towers.iter().enumerate() {
                    let z = self.encode(tape, store, &t.encoder, x)?;
                    outs[k] = t.head.forward(tape, store, z)?;
                }
                outs
            }
            Net::Mtl { encoder, heads } => {
                let z = self.encode(tape, store, encoder, x)?;
                let a = heads[0].forward(tape, store, z)?;
                let b = heads[1].forward(tape, store, z)?;
                [a, b]
            }
        };
        let [m1, s1] = self.finish_head(tape, raw[0])?;
        let [m2, s2] = self.finish_head(tape, raw[1])?;
        tape.concat(&[m1, s1, m2, s2])
    }

    /// Convenience single-sample evaluation.
    pub fn predict(&self, store: &ParamStore, x: &[f64]) -> Result<ExpertOutput> {
        let mut tape = Tape::new();
        let xv = tape.constant(Tensor::matrix(1, x.len(), x.to_vec())?)?;
        let out = self.forward(&mut tape, store, xv)?;
        Ok(ExpertOutput::from_row(tape.value(out).values()))
    }
}

/// The eight expert slots. A bank may hold a subset (fixed-slot baselines).
#[derive(Clone, Debug)]
pub struct ExpertBank {
    experts: Vec<Option<Expert>>,
}

impl ExpertBank {
    /// Builds experts for `slots`; each slot's initial weights depend only on
    /// `(seed, slot)`.
    pub fn new(
        store: &mut ParamStore,
        transforms: &ModalityTransforms,
        config: &ExpertConfig,
        seed: u64,
        slots: &[Slot],
    ) -> Result<Self> {
        let mut experts: Vec<Option<Expert>> = (0..NUM_SLOTS).map(|_| None).collect();
        for slot in Slot::all() {
            if slots.contains(&slot) {
                let dim = transforms.input_dim(slot.path);
                experts[slot.index()] = Some(Expert::new(store, slot, dim, config, seed)?);
            }
        }
        Ok(ExpertBank { experts })
    }

    pub fn full(
        store: &mut ParamStore,
        transforms: &ModalityTransforms,
        config: &ExpertConfig,
        seed: u64,
    ) -> Result<Self> {
        Self::new(store, transforms, config, seed, &Slot::all())
    }

    pub fn get(&self, slot: Slot) -> Option<&Expert> {
        self.experts[slot.index()].as_ref()
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.experts.iter().flatten().map(Expert::slot)
    }

    pub fn is_full(&self) -> bool {
        self.experts.iter().all(Option::is_some)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.experts.iter().flatten().flat_map(Expert::param_ids).collect()
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, slot: Slot, x: Var) -> Result<Var> {
        self.get(slot)
            .ok_or_else(|| Error::Contract(format!("expert slot {slot} is not part of this bank")))?
            .forward(tape, store, x)
    }
}
