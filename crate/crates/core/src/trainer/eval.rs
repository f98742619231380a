use std::thread;

use super::model::{Model, WeightMode};
use crate::ad::Tape;
use crate::bench::Dataset;
use crate::error::{Error, Result};
use crate::experts::{ExpertOutput, Slot, NUM_SLOTS};
use crate::router::{argmax, joint_pmf, JointPmf, RoutingState};

const EVAL_CHUNK: usize = 256;

/// Predictions for one test sample, in original target units.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePrediction {
    pub y: [f64; 2],
    pub soft: [f64; 2],
    pub hard: [f64; 2],
    /// Mean prediction of every slot the model contains.
    pub slots: [Option<[f64; 2]>; NUM_SLOTS],
    pub state: RoutingState,
    /// Argmax of the joint, lowest index on ties.
    pub selected: Slot,
    /// Expected loss in standardized units.
    pub loss: f64,
}

impl SamplePrediction {
    /// Mean absolute error over both tasks of the hard prediction.
    pub fn hard_abs_error(&self) -> f64 {
        0.5 * ((self.hard[0] - self.y[0]).abs() + (self.hard[1] - self.y[1]).abs())
    }

    /// Mean absolute error over both tasks of one slot's prediction.
    pub fn slot_abs_error(&self, slot: Slot) -> Option<f64> {
        self.slots[slot.index()].map(|p| 0.5 * ((p[0] - self.y[0]).abs() + (p[1] - self.y[1]).abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<SamplePrediction>,
    pub rmse: [f64; 2],
    pub hard_rmse: [f64; 2],
    pub loss: f64,
}

impl Evaluation {
    pub fn from_predictions(predictions: Vec<SamplePrediction>) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::Contract("evaluation of an empty dataset".into()));
        }
        let col = |f: &dyn Fn(&SamplePrediction) -> f64| predictions.iter().map(f).collect::<Vec<_>>();
        let y1 = col(&|p| p.y[0]);
        let y2 = col(&|p| p.y[1]);
        let soft = [rmse(&col(&|p| p.soft[0]), &y1)?, rmse(&col(&|p| p.soft[1]), &y2)?];
        let hard = [rmse(&col(&|p| p.hard[0]), &y1)?, rmse(&col(&|p| p.hard[1]), &y2)?];
        let loss = predictions.iter().map(|p| p.loss).sum::<f64>() / predictions.len() as f64;
        Ok(Evaluation { predictions, rmse: soft, hard_rmse: hard, loss })
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn states(&self) -> Vec<RoutingState> {
        self.predictions.iter().map(|p| p.state.clone()).collect()
    }

    pub fn joint_pmf(&self) -> JointPmf {
        joint_pmf(&self.states()).expect("evaluation is nonempty")
    }
}

/// Root-mean-square error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Shape(format!("rmse over {} predictions and {} targets", pred.len(), truth.len())));
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

fn predict_chunk(model: &Model, data: &Dataset, idx: &[usize]) -> Result<Vec<SamplePrediction>> {
    let mut tape = Tape::new();
    let f = model.forward_batch(&mut tape, data, idx, WeightMode::Soft)?;
    let states = model.routing_states(data, idx)?;
    let losses = tape.value(f.sample_loss).values();
    let outs: Vec<Option<&crate::ad::Tensor>> = f.outputs.iter().map(|o| o.map(|v| tape.value(v))).collect();
    let sc = model.scale;
    idx.iter()
        .enumerate()
        .zip(states)
        .map(|((r, &i), state)| {
            let s = &data.samples()[i];
            let raw: [Option<ExpertOutput>; NUM_SLOTS] =
                std::array::from_fn(|k| outs[k].map(|t| ExpertOutput::from_row(t.row(r))));
            let mut soft = [0.0; 2];
            for (k, out) in raw.iter().enumerate() {
                if let Some(out) = out {
                    for (task, acc) in soft.iter_mut().enumerate() {
                        *acc += state.joint[k] * out.mean(task);
                    }
                }
            }
            let selected = Slot::from_index(argmax(&state.joint)).expect("eight slots");
            let sel = raw[selected.index()]
                .ok_or_else(|| Error::Contract(format!("selected slot {selected} is not in the model")))?;
            let slots = raw.map(|o| o.map(|o| [sc.to_original(0, o.mean1), sc.to_original(1, o.mean2)]));
            Ok(SamplePrediction {
                y: [s.y1, s.y2],
                soft: [sc.to_original(0, soft[0]), sc.to_original(1, soft[1])],
                hard: [sc.to_original(0, sel.mean1), sc.to_original(1, sel.mean2)],
                slots,
                state,
                selected,
                loss: losses[r],
            })
        })
        .collect()
}

/// Evaluates `model` on every sample of `data`. With `threads > 1` chunks
/// are processed concurrently; results keep dataset order.
pub fn evaluate(model: &Model, data: &Dataset, threads: usize) -> Result<Evaluation> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let chunks: Vec<&[usize]> = idx.chunks(EVAL_CHUNK).collect();
    let parts: Vec<Result<Vec<SamplePrediction>>> = if threads <= 1 || chunks.len() == 1 {
        chunks.iter().map(|c| predict_chunk(model, data, c)).collect()
    } else {
        thread::scope(|scope| {
            let per = chunks.len().div_ceil(threads);
            let handles: Vec<_> = chunks
                .chunks(per)
                .map(|group| {
                    scope.spawn(move || group.iter().map(|c| predict_chunk(model, data, c)).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("evaluation worker panicked")).collect()
        })
    };
    let mut predictions = Vec::with_capacity(data.len());
    for part in parts {
        predictions.extend(part?);
    }
    Evaluation::from_predictions(predictions)
}
