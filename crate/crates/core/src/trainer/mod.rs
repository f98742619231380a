//! Optimization of the router and expert bank, fixed-slot baselines and
//! evaluation.

mod adam;
mod config;
mod eval;
mod model;
mod run_dir;
mod train;

pub use adam::Adam;
pub use config::{RouteSpec, StopMetric, TrainConfig};
pub use eval::{evaluate, rmse, Evaluation, SamplePrediction};
pub use model::{BatchForward, Model, TargetScale, WeightMode};
pub use run_dir::{load_model, read_metrics, write_run, RunFiles};
pub use train::{fit, holdout, train, train_fixed_baseline, EpochRecord, Metrics, TrainOutcome};
