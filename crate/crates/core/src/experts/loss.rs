use serde::{Deserialize, Serialize};

use crate::ad::{Tape, Var};
use crate::error::Result;

/// Heteroscedastic predictions of one expert for both tasks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertOutput {
    pub mean1: f64,
    pub logvar1: f64,
    pub mean2: f64,
    pub logvar2: f64,
}

impl ExpertOutput {
    pub fn from_row(row: &[f64]) -> Self {
        ExpertOutput { mean1: row[0], logvar1: row[1], mean2: row[2], logvar2: row[3] }
    }

    pub fn mean(&self, task: usize) -> f64 {
        if task == 0 {
            self.mean1
        } else {
            self.mean2
        }
    }

    pub fn logvar(&self, task: usize) -> f64 {
        if task == 0 {
            self.logvar1
        } else {
            self.logvar2
        }
    }
}

/// Gaussian negative log-likelihood without the constant:
/// `½(y−ŷ)²·e^{−s} + ½s` with `s = log σ²`.
pub fn heteroscedastic_loss(y: f64, mean: f64, logvar: f64) -> f64 {
    let r = y - mean;
    0.5 * r * r * (-logvar).exp() + 0.5 * logvar
}

/// Sum of the two task losses. STL and MTL use the same total; they differ
/// only in the network that produced `out`.
pub fn paradigm_loss(out: &ExpertOutput, y1: f64, y2: f64) -> f64 {
    heteroscedastic_loss(y1, out.mean1, out.logvar1) + heteroscedastic_loss(y2, out.mean2, out.logvar2)
}

/// Per-sample heteroscedastic loss on the tape; all arguments are n×1.
pub fn heteroscedastic_loss_graph(tape: &mut Tape, y: Var, mean: Var, logvar: Var) -> Result<Var> {
    let r = tape.sub(y, mean)?;
    let r2 = tape.square(r);
    let neg = tape.scale(logvar, -1.0);
    let precision = tape.exp(neg)?;
    let fit = tape.mul(r2, precision)?;
    let fit = tape.scale(fit, 0.5);
    let reg = tape.scale(logvar, 0.5);
    tape.add(fit, reg)
}

/// Per-sample paradigm loss (n×1) for an expert output `out` (n×4) against
/// targets `y1`, `y2` (n×1 each).
pub fn paradigm_loss_graph(tape: &mut Tape, out: Var, y1: Var, y2: Var) -> Result<Var> {
    let m1 = tape.slice_cols(out, 0, 1)?;
    let s1 = tape.slice_cols(out, 1, 1)?;
    let m2 = tape.slice_cols(out, 2, 1)?;
    let s2 = tape.slice_cols(out, 3, 1)?;
    let l1 = heteroscedastic_loss_graph(tape, y1, m1, s1)?;
    let l2 = heteroscedastic_loss_graph(tape, y2, m2, s2)?;
    tape.add(l1, l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::{ParamStore, Tensor};

    #[test]
    fn plug_in_values() {
        assert_eq!(heteroscedastic_loss(1.5, 1.5, 0.0), 0.0);
        assert_eq!(heteroscedastic_loss(1.0, 0.0, 0.0), 0.5);
        let l = heteroscedastic_loss(2.0, 0.0, 4f64.ln());
        assert!((l - (0.5 + 0.5 * 4f64.ln())).abs() < 1e-15);
        assert!((l - 1.1931).abs() < 1e-4);
    }

    #[test]
    fn paradigm_loss_adds_tasks() {
        let exact = ExpertOutput { mean1: 1.0, logvar1: 0.0, mean2: -2.0, logvar2: 0.0 };
        assert_eq!(paradigm_loss(&exact, 1.0, -2.0), 0.0);
        let out = ExpertOutput { mean1: 0.0, logvar1: 0.0, mean2: 0.0, logvar2: 4f64.ln() };
        let total = paradigm_loss(&out, 1.0, 2.0);
        assert!((total - (0.5 + 0.5 + 0.5 * 4f64.ln())).abs() < 1e-15);
        assert!((total - 1.6931).abs() < 1e-4);
        let swapped = ExpertOutput { mean1: 0.0, logvar1: 4f64.ln(), mean2: 0.0, logvar2: 0.0 };
        assert_eq!(paradigm_loss(&swapped, 2.0, 1.0), total);
    }

    #[test]
    fn homoscedastic_reduces_to_half_squared_error() {
        for r in [-3.0, -0.5, 0.0, 0.25, 2.0] {
            assert_eq!(heteroscedastic_loss(r, 0.0, 0.0), 0.5 * r * r);
        }
    }

    #[test]
    fn logvar_minimizer_is_log_squared_residual() {
        for r in [0.2f64, 1.0, 3.0] {
            let best = (-6000..=6000)
                .map(|k| k as f64 * 1e-3)
                .min_by(|a, b| heteroscedastic_loss(r, 0.0, *a).total_cmp(&heteroscedastic_loss(r, 0.0, *b)))
                .unwrap();
            assert!((best - (r * r).ln()).abs() <= 1e-3, "r={r}: {best}");
        }
    }

    #[test]
    fn graph_matches_scalar() {
        let store = ParamStore::new();
        let mut tape = Tape::new();
        let rows = [[0.3, -0.2, 1.0, 0.5], [-1.0, 1.5, 0.0, -2.0]];
        let out = tape.constant(Tensor::from_rows(&rows).unwrap()).unwrap();
        let y1 = tape.constant(Tensor::matrix(2, 1, vec![1.0, 0.0]).unwrap()).unwrap();
        let y2 = tape.constant(Tensor::matrix(2, 1, vec![-0.5, 0.7]).unwrap()).unwrap();
        let l = paradigm_loss_graph(&mut tape, out, y1, y2).unwrap();
        let vals = tape.value(l).values().to_vec();
        let expect0 = paradigm_loss(&ExpertOutput::from_row(&rows[0]), 1.0, -0.5);
        let expect1 = paradigm_loss(&ExpertOutput::from_row(&rows[1]), 0.0, 0.7);
        assert!((vals[0] - expect0).abs() < 1e-14);
        assert!((vals[1] - expect1).abs() < 1e-14);
        let total = tape.sum(l);
        assert!(tape.backward(total, &store).is_ok());
    }
}
