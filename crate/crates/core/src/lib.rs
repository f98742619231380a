//! Adaptive routing over modality-processing paths and task-sharing
//! paradigms for two-task heteroscedastic regression.
//!
//! Every sample carries a numeric vector and a text-surrogate vector. Four
//! modality paths (T1, T2, N1, N2) turn that pair into an expert input; two
//! task paradigms (STL, MTL) decide whether the two regression targets share
//! an encoder. A two-stage router places a probability distribution over the
//! resulting eight expert slots, trained end to end with the expected
//! heteroscedastic loss (soft routing) or a straight-through Gumbel-Softmax
//! sample (hard routing).
//!
//! Modules, bottom up:
//!
//! * [`ad`]: reverse-mode autodiff tape over dense `f64` tensors, MLPs,
//!   finite-difference gradient checks and parameter checkpoints.
//! * [`bench`]: random Fourier feature maps and the equation-driven
//!   synthetic scenarios.
//! * [`tabular`]: Gaussian, copula and KDE tabular synthesis with
//!   fidelity reports.
//! * [`experts`]: modality transforms, STL/MTL expert networks and the
//!   heteroscedastic losses.
//! * [`router`]: routing state, mixture prediction, expected loss,
//!   Gumbel selection and entropy regularization.
//! * [`trainer`]: end-to-end optimization, fixed-slot baselines, metrics
//!   and run directories.
//! * [`diagnostics`]: routing reports, comparison tables and the scenario
//!   suite.

pub mod ad;
pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod experts;
pub mod rng;
pub mod router;
pub mod tabular;
pub mod trainer;

pub use error::{Error, Result};
