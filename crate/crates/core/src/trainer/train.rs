use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::{RouteSpec, StopMetric, TrainConfig};
use super::eval::{evaluate, Evaluation};
use super::model::{Model, TargetScale, WeightMode};
use crate::ad::{ParamStore, Tape};
use crate::bench::Dataset;
use crate::error::{Error, Result};
use crate::experts::{ModalityPath, Slot, TaskParadigm};
use crate::rng::rng_from;
use crate::router::RoutingMode;

const SPLIT_TAG: u64 = 0x5911;
const SHUFFLE_TAG: u64 = 0x5f1e;

/// One row of the loss curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub tau: f64,
    pub entropy_coef: f64,
}

/// Everything a training run reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub label: String,
    pub block: usize,
    pub route: RouteSpec,
    pub mode: RoutingMode,
    pub dataset_hash: String,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub rmse_task1: f64,
    pub rmse_task2: f64,
    pub hard_rmse_task1: f64,
    pub hard_rmse_task2: f64,
    pub test_loss: f64,
    /// Average joint routing PMF over the test set, slot order.
    pub joint_pmf: [f64; 8],
    pub loss_curve: Vec<EpochRecord>,
    /// Mean training objective of each optimizer step.
    pub step_losses: Vec<f64>,
}

impl Metrics {
    pub fn rmse(&self) -> [f64; 2] {
        [self.rmse_task1, self.rmse_task2]
    }

    pub fn mass(&self, paradigm: TaskParadigm) -> f64 {
        Slot::all().iter().filter(|s| s.paradigm == paradigm).map(|s| self.joint_pmf[s.index()]).sum()
    }

    pub fn path_marginal(&self, path: ModalityPath) -> f64 {
        self.joint_pmf[2 * path.index()] + self.joint_pmf[2 * path.index() + 1]
    }
}

/// Deterministic fit/validation split of `0..n`.
pub fn holdout(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(seed, &[SPLIT_TAG]));
    let n_val = if n >= 2 { ((n as f64 * val_fraction).round() as usize).min(n - 1) } else { 0 };
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Validation score of `idx`: mean expected loss, or mean squared error of
/// the soft prediction summed over both tasks (standardized units).
fn validation_score(model: &Model, data: &Dataset, idx: &[usize], metric: StopMetric) -> Result<f64> {
    let mut total = 0.0;
    for chunk in idx.chunks(256) {
        let mut tape = Tape::new();
        let f = model.forward_batch(&mut tape, data, chunk, WeightMode::Soft)?;
        total += match metric {
            StopMetric::Loss => tape.value(f.sample_loss).values().iter().sum::<f64>(),
            StopMetric::Mse => {
                let preds = f.soft_means(&tape);
                chunk
                    .iter()
                    .zip(preds)
                    .map(|(&i, p)| {
                        let s = &data.samples()[i];
                        let e1 = model.scale.to_model(0, s.y1) - p[0];
                        let e2 = model.scale.to_model(1, s.y2) - p[1];
                        e1 * e1 + e2 * e2
                    })
                    .sum::<f64>()
            }
        };
    }
    Ok(total / idx.len() as f64)
}

/// A trained model together with its training history.
pub struct TrainOutcome {
    pub model: Model,
    pub curve: Vec<EpochRecord>,
    pub step_losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Optimizes `model` on `data`, restoring the parameters with the lowest
/// validation loss.
pub fn fit(config: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let mut model = Model::new(config, data.d_num(), data.d_text())?;
    let (fit_idx, val_idx) = holdout(data.len(), config.val_fraction, config.seed);
    model.scale = if config.standardize_targets { TargetScale::fit(data, &fit_idx) } else { TargetScale::identity() };
    let mut adam = Adam::new(&model.store, config.learning_rate, config.beta1, config.beta2, config.adam_eps);
    let hard = model.router.is_some() && config.router.mode == RoutingMode::Hard;

    let mut curve = Vec::with_capacity(config.epochs);
    let mut step_losses = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut since_best = 0;
    let mut order = fit_idx.clone();

    for epoch in 0..config.epochs {
        let tau = config.router.tau_at(epoch, config.epochs);
        let lambda = if config.route.is_routed() { config.router.entropy_coef_at(epoch, config.epochs) } else { 0.0 };
        let mode = if hard {
            WeightMode::Gumbel { seed: config.seed, epoch, tau, straight_through: config.router.straight_through }
        } else {
            WeightMode::Soft
        };
        order.copy_from_slice(&fit_idx);
        order.shuffle(&mut rng_from(config.seed, &[SHUFFLE_TAG, epoch as u64]));

        let mut epoch_total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let f = model.forward_batch(&mut tape, data, batch, mode)?;
            let expected = tape.mean(f.sample_loss);
            let objective = match f.entropy {
                Some(h) if lambda > 0.0 => {
                    let h = tape.mean(h);
                    let penalty = tape.scale(h, -lambda);
                    tape.add(expected, penalty)?
                }
                _ => expected,
            };
            let value = tape.value(objective).item();
            if !value.is_finite() {
                return Err(Error::Train { epoch, reason: format!("training loss became {value}") });
            }
            let mut grads = tape.backward(objective, &model.store)?;
            let norm = grads.global_norm();
            if !norm.is_finite() {
                return Err(Error::Train { epoch, reason: "non-finite gradient".into() });
            }
            if config.grad_clip > 0.0 && norm > config.grad_clip {
                grads.scale(config.grad_clip / norm);
            }
            adam.step(&mut model.store, &grads);
            step_losses.push(value);
            epoch_total += tape.value(expected).item() * batch.len() as f64;
        }
        let train_loss = epoch_total / fit_idx.len() as f64;
        let val_loss =
            if val_idx.is_empty() { train_loss } else { validation_score(&model, data, &val_idx, config.stop_metric)? };
        if !val_loss.is_finite() {
            return Err(Error::Train { epoch, reason: format!("validation loss became {val_loss}") });
        }
        curve.push(EpochRecord { epoch, train_loss, val_loss, tau, entropy_coef: lambda });

        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.store.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        }
    }
    let (best_val_loss, best_epoch, store) = best.expect("at least one epoch");
    model.store = store;
    Ok(TrainOutcome { model, curve, step_losses, best_epoch, best_val_loss })
}

/// Trains on `train`, evaluates on `test`.
pub fn train(config: &TrainConfig, train: &Dataset, test: &Dataset) -> Result<(Model, Metrics, Evaluation)> {
    let outcome = fit(config, train)?;
    let eval = evaluate(&outcome.model, test, config.threads)?;
    let (name, block) = config.row_label();
    let metrics = Metrics {
        label: config.label.clone().unwrap_or(name),
        block,
        route: config.route,
        mode: config.router.mode,
        dataset_hash: format!("{}:{}", train.content_hash(), test.content_hash()),
        seed: config.seed,
        epochs_run: outcome.curve.len(),
        best_epoch: outcome.best_epoch,
        best_val_loss: outcome.best_val_loss,
        rmse_task1: eval.rmse[0],
        rmse_task2: eval.rmse[1],
        hard_rmse_task1: eval.hard_rmse[0],
        hard_rmse_task2: eval.hard_rmse[1],
        test_loss: eval.loss,
        joint_pmf: eval.joint_pmf().mean,
        loss_curve: outcome.curve,
        step_losses: outcome.step_losses,
    };
    Ok((outcome.model, metrics, eval))
}

/// Trains only the expert of `slot`, with no router.
pub fn train_fixed_baseline(
    path: ModalityPath,
    paradigm: TaskParadigm,
    config: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
) -> Result<(Model, Metrics, Evaluation)> {
    let config = TrainConfig { route: RouteSpec::Fixed(Slot::new(path, paradigm)), ..config.clone() };
    train(&config, train_set, test_set)
}
