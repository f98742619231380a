use serde::{Deserialize, Serialize};

use crate::ad::softmax;
use crate::error::{Error, Result};
use crate::experts::{paradigm_loss, ExpertOutput, ModalityPath, Slot, TaskParadigm, NUM_SLOTS};

pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingMode {
    Soft,
    Hard,
}

impl std::str::FromStr for RoutingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "soft" => Ok(RoutingMode::Soft),
            "hard" => Ok(RoutingMode::Hard),
            other => Err(Error::Config(format!("unknown routing mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for RoutingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RoutingMode::Soft => "soft",
            RoutingMode::Hard => "hard",
        })
    }
}

/// Routing decision for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingState {
    /// Distribution over (T1, T2, N1, N2).
    pub pi_mod: [f64; 4],
    /// Per-path distribution over (STL, MTL).
    pub pi_task: [[f64; 2]; 4],
    /// `pi_mod[i] · pi_task[i][j]` at slot index `2i + j`.
    pub joint: [f64; NUM_SLOTS],
    pub mode: RoutingMode,
    pub selected: Option<Slot>,
}

impl RoutingState {
    pub fn from_probabilities(pi_mod: [f64; 4], pi_task: [[f64; 2]; 4]) -> Self {
        let joint = std::array::from_fn(|s| pi_mod[s / 2] * pi_task[s / 2][s % 2]);
        RoutingState { pi_mod, pi_task, joint, mode: RoutingMode::Soft, selected: None }
    }

    pub fn from_logits(mod_logits: &[f64; 4], task_logits: &[[f64; 2]; 4]) -> Self {
        let pm = softmax(mod_logits);
        let pi_mod = [pm[0], pm[1], pm[2], pm[3]];
        let pi_task = std::array::from_fn(|i| {
            let p = softmax(&task_logits[i]);
            [p[0], p[1]]
        });
        Self::from_probabilities(pi_mod, pi_task)
    }

    /// All mass on one slot.
    pub fn one_hot(slot: Slot) -> Self {
        let mut pi_mod = [0.0; 4];
        pi_mod[slot.path.index()] = 1.0;
        let mut pi_task = [[0.5; 2]; 4];
        pi_task[slot.path.index()] = [0.0; 2];
        pi_task[slot.path.index()][slot.paradigm.index()] = 1.0;
        Self::from_probabilities(pi_mod, pi_task)
    }

    /// Switches to hard mode, selecting the most probable slot (lowest index
    /// on ties).
    pub fn harden(mut self) -> Self {
        self.mode = RoutingMode::Hard;
        self.selected = Slot::from_index(argmax(&self.joint));
        self
    }

    pub fn check_simplices(&self) -> Result<()> {
        let check = |name: &str, p: &[f64]| -> Result<()> {
            let sum: f64 = p.iter().sum();
            if p.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::Numeric(format!("{name} is not a distribution: {p:?}")));
            }
            Ok(())
        };
        check("pi_mod", &self.pi_mod)?;
        for (i, row) in self.pi_task.iter().enumerate() {
            check(&format!("pi_task[{i}]"), row)?;
        }
        check("joint", &self.joint)
    }

    pub fn path_marginal(&self, path: ModalityPath) -> f64 {
        self.joint[2 * path.index()] + self.joint[2 * path.index() + 1]
    }

    pub fn paradigm_mass(&self, paradigm: TaskParadigm) -> f64 {
        (0..4).map(|i| self.joint[2 * i + paradigm.index()]).sum()
    }

    /// Weights used for prediction: the joint in soft mode, a one-hot on
    /// the selected slot in hard mode.
    pub fn weights(&self) -> [f64; NUM_SLOTS] {
        match (self.mode, self.selected) {
            (RoutingMode::Hard, Some(slot)) => {
                let mut w = [0.0; NUM_SLOTS];
                w[slot.index()] = 1.0;
                w
            }
            _ => self.joint,
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Mixture prediction `Σ_s w_s · ŷ_s` for both tasks.
pub fn soft_predict(state: &RoutingState, outputs: &[ExpertOutput; NUM_SLOTS]) -> (f64, f64) {
    let w = state.weights();
    let y1 = w.iter().zip(outputs).map(|(w, o)| w * o.mean1).sum();
    let y2 = w.iter().zip(outputs).map(|(w, o)| w * o.mean2).sum();
    (y1, y2)
}

/// Probability-weighted paradigm loss over all slots.
pub fn expected_loss(state: &RoutingState, outputs: &[ExpertOutput; NUM_SLOTS], y1: f64, y2: f64) -> f64 {
    state.weights().iter().zip(outputs).map(|(w, o)| if *w == 0.0 { 0.0 } else { w * paradigm_loss(o, y1, y2) }).sum()
}

/// Shannon entropy in nats, with `0·ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// `−λ·[H(π_mod) + mean_i H(π_task,i)]`; adding it to the loss rewards
/// spread-out routing.
pub fn entropy_penalty(state: &RoutingState, coef: f64) -> f64 {
    if coef == 0.0 {
        return 0.0;
    }
    let task_mean = state.pi_task.iter().map(|r| entropy(r)).sum::<f64>() / 4.0;
    -coef * (entropy(&state.pi_mod) + task_mean)
}

/// Batch-average joint PMF plus the per-sample rows it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    pub mean: [f64; NUM_SLOTS],
    pub per_sample: Vec<[f64; NUM_SLOTS]>,
}

impl JointPmf {
    pub fn path_marginals(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.mean[2 * i] + self.mean[2 * i + 1])
    }

    pub fn paradigm_mass(&self, paradigm: TaskParadigm) -> f64 {
        (0..4).map(|i| self.mean[2 * i + paradigm.index()]).sum()
    }
}

pub fn joint_pmf(states: &[RoutingState]) -> Result<JointPmf> {
    if states.is_empty() {
        return Err(Error::Contract("joint PMF of an empty batch".into()));
    }
    let per_sample: Vec<[f64; NUM_SLOTS]> = states.iter().map(|s| s.joint).collect();
    Ok(JointPmf { mean: mean_rows(&per_sample), per_sample })
}

pub(crate) fn mean_rows(rows: &[[f64; NUM_SLOTS]]) -> [f64; NUM_SLOTS] {
    let n = rows.len() as f64;
    std::array::from_fn(|s| rows.iter().map(|r| r[s]).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outputs_with_means(means: [f64; 8]) -> [ExpertOutput; 8] {
        means.map(|m| ExpertOutput { mean1: m, logvar1: 0.0, mean2: -m, logvar2: 0.0 })
    }

    #[test]
    fn zero_logits_are_uniform() {
        let s = RoutingState::from_logits(&[0.0; 4], &[[0.0; 2]; 4]);
        assert_eq!(s.pi_mod, [0.25; 4]);
        assert_eq!(s.pi_task, [[0.5; 2]; 4]);
        assert_eq!(s.joint, [0.125; 8]);
        s.check_simplices().unwrap();
    }

    #[test]
    fn shift_invariance_of_modality_logits() {
        let a = RoutingState::from_logits(&[0.3, -1.0, 2.0, 0.0], &[[0.0; 2]; 4]);
        let b = RoutingState::from_logits(&[5.3, 4.0, 7.0, 5.0], &[[0.0; 2]; 4]);
        for (x, y) in a.pi_mod.iter().zip(&b.pi_mod) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_predictions() {
        let uniform = RoutingState::from_logits(&[0.0; 4], &[[0.0; 2]; 4]);
        let (y1, _) = soft_predict(&uniform, &outputs_with_means([4.0; 8]));
        assert!((y1 - 4.0).abs() < 1e-15);
        let (y1, y2) = soft_predict(&uniform, &outputs_with_means([0., 1., 2., 3., 4., 5., 6., 7.]));
        assert_eq!((y1, y2), (3.5, -3.5));
        let one = RoutingState::one_hot(Slot::from_index(5).unwrap());
        assert_eq!(soft_predict(&one, &outputs_with_means([0., 1., 2., 3., 4., 5., 6., 7.])).0, 5.0);
    }

    #[test]
    fn expected_loss_identities() {
        let outs = outputs_with_means([0., 1., 2., 3., 4., 5., 6., 7.]);
        for slot in Slot::all() {
            let one = RoutingState::one_hot(slot);
            let direct = paradigm_loss(&outs[slot.index()], 0.3, -0.7);
            assert!((expected_loss(&one, &outs, 0.3, -0.7) - direct).abs() < 1e-12);
        }
        // slot losses 0, 0.5, …, 3.5 averaged uniformly
        let ladder: [ExpertOutput; 8] =
            std::array::from_fn(|s| ExpertOutput { mean1: (s as f64).sqrt(), logvar1: 0.0, mean2: 0.0, logvar2: 0.0 });
        let uniform = RoutingState::from_logits(&[0.0; 4], &[[0.0; 2]; 4]);
        assert!((expected_loss(&uniform, &ladder, 0.0, 0.0) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn entropy_values() {
        let uniform = RoutingState::from_logits(&[0.0; 4], &[[0.0; 2]; 4]);
        assert!((entropy(&uniform.pi_mod) - 4f64.ln()).abs() < 1e-15);
        assert!((entropy(&uniform.pi_mod) - 1.3863).abs() < 1e-4);
        assert_eq!(entropy(&[0.0, 1.0, 0.0, 0.0]), 0.0);
        assert_eq!(entropy_penalty(&uniform, 0.0), 0.0);
        let expected = -0.1 * (4f64.ln() + 2f64.ln());
        assert!((entropy_penalty(&uniform, 0.1) - expected).abs() < 1e-15);
    }

    #[test]
    fn joint_pmf_averages() {
        let a = RoutingState::one_hot(Slot::from_index(0).unwrap());
        let b = RoutingState::one_hot(Slot::from_index(7).unwrap());
        let pmf = joint_pmf(&[a.clone(), b]).unwrap();
        assert_eq!(pmf.mean, [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        assert_eq!(joint_pmf(std::slice::from_ref(&a)).unwrap().mean, a.joint);
        assert_eq!(joint_pmf(&[a.clone(), a.clone(), a.clone()]).unwrap().mean, a.joint);
        assert!(joint_pmf(&[]).is_err());
    }

    #[test]
    fn harden_breaks_ties_low() {
        let s = RoutingState::from_logits(&[0.0; 4], &[[0.0; 2]; 4]).harden();
        assert_eq!(s.selected, Slot::from_index(0));
        assert_eq!(s.weights()[0], 1.0);
    }
}
