use rand::Rng as _;

use super::state::argmax;
use crate::ad::softmax;
use crate::experts::{Slot, NUM_SLOTS};
use crate::rng::Rng;

/// Stand-in for `ln 0` so that zero-probability slots can never win.
pub const LOG_ZERO_FLOOR: f64 = -1e9;

/// One standard Gumbel draw, `−ln(−ln u)` with `u` in the open unit interval.
pub fn sample_gumbel(rng: &mut Rng) -> f64 {
    let u: f64 = rng.random();
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    -(-u.ln()).ln()
}

pub fn floored_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln().max(LOG_ZERO_FLOOR)
    } else {
        LOG_ZERO_FLOOR
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GumbelSample {
    /// `softmax((ln π + g)/τ)`, or its one-hot when straight-through.
    pub weights: [f64; NUM_SLOTS],
    /// Relaxed weights before any straight-through rounding.
    pub soft_weights: [f64; NUM_SLOTS],
    pub selected: Slot,
}

/// Draws a relaxed one-hot sample over the eight slots from probabilities
/// `joint`.
pub fn gumbel_select(joint: &[f64; NUM_SLOTS], tau: f64, rng: &mut Rng, straight_through: bool) -> GumbelSample {
    assert!(tau > 0.0, "Gumbel temperature must be positive");
    let noise: [f64; NUM_SLOTS] = std::array::from_fn(|_| sample_gumbel(rng));
    gumbel_from_noise(joint, &noise, tau, straight_through)
}

/// Same as [`gumbel_select`] with explicit noise.
pub fn gumbel_from_noise(
    joint: &[f64; NUM_SLOTS],
    noise: &[f64; NUM_SLOTS],
    tau: f64,
    straight_through: bool,
) -> GumbelSample {
    let perturbed: Vec<f64> = joint.iter().zip(noise).map(|(p, g)| (floored_ln(*p) + g) / tau).collect();
    let soft = softmax(&perturbed);
    let soft_weights: [f64; NUM_SLOTS] = std::array::from_fn(|i| soft[i]);
    let best = argmax(&perturbed);
    let weights = if straight_through {
        let mut w = [0.0; NUM_SLOTS];
        w[best] = 1.0;
        w
    } else {
        soft_weights
    };
    GumbelSample { weights, soft_weights, selected: Slot::from_index(best).expect("eight slots") }
}
