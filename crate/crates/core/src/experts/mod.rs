//! Modality paths, task paradigms, the expert bank and heteroscedastic losses.

mod bank;
mod loss;
mod paths;

pub use bank::{Expert, ExpertBank, ExpertConfig};
pub use loss::{heteroscedastic_loss, heteroscedastic_loss_graph, paradigm_loss, paradigm_loss_graph, ExpertOutput};
pub use paths::{ModalityPath, ModalityTransforms, Slot, TaskParadigm, NUM_SLOTS};
