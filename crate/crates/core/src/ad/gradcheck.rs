use serde::Serialize;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Denominator floor when turning an absolute gradient discrepancy into a
/// relative one, so that gradients near zero are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct GradFailure {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub failures: Vec<GradFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares the tape gradient of `expr` against central differences for every
/// coordinate of `params` (every non-frozen parameter when `params` is empty).
pub fn grad_check<F>(
    expr: F,
    store: &mut ParamStore,
    params: &[ParamId],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = expr(&mut tape, store)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let out = expr(&mut tape, store)?;
    let grads = tape.backward(out, store)?;

    let ids: Vec<ParamId> =
        if params.is_empty() { store.ids().filter(|id| !store.is_frozen(*id)).collect() } else { params.to_vec() };

    let mut report = GradCheckReport { checked: 0, max_relative_error: 0.0, failures: Vec::new() };
    for id in ids {
        for i in 0..store.get(id).len() {
            let original = store.get(id).values()[i];
            store.get_mut(id).values_mut()[i] = original + step;
            let plus = eval(store)?;
            store.get_mut(id).values_mut()[i] = original - step;
            let minus = eval(store)?;
            store.get_mut(id).values_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let analytic = grads.param(id).values()[i];
            let rel = relative_error(analytic, numeric);
            report.checked += 1;
            report.max_relative_error = report.max_relative_error.max(rel);
            if rel >= tolerance {
                report.failures.push(GradFailure {
                    param: store.name(id).to_string(),
                    index: i,
                    analytic,
                    numeric,
                    relative_error: rel,
                });
            }
        }
    }
    Ok(report)
}
