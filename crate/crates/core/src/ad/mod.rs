//! Reverse-mode automatic differentiation over dense `f64` tensors.

mod gradcheck;
mod mlp;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, GradFailure, RELATIVE_FLOOR};
pub use mlp::{Activation, Layer, Mlp};
pub use params::{Checkpoint, CheckpointEntry, ParamId, ParamStore, CHECKPOINT_VERSION};
pub use tape::{softmax, softmax_in_place, Gradients, Tape, Var, GUARD_EPS};
pub use tensor::Tensor;
