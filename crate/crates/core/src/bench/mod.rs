//! Equation-driven synthetic benchmark for two-modality, two-task regression.

mod dataset;
mod rff;
mod scenario;

pub use dataset::{
    generate_benchmark, read_benchmark, read_sidecar, write_benchmark, Dataset, Sample, Sidecar, Split, SIDECAR_VERSION,
};
pub use rff::RffMap;
pub use scenario::{split_seed, Scenario, ScenarioDims, ScenarioSpec};
