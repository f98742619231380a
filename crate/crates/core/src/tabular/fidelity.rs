use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::pearson;
use super::table::{Table, TabularSchema};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalDistance {
    pub column: String,
    /// Two-sample Kolmogorov–Smirnov statistic.
    pub ks: f64,
}

/// How closely a synthetic table tracks its source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Mean absolute difference of upper-triangle Pearson correlations.
    pub correlation_mad: f64,
    /// KL(source ‖ synthetic) in nats over joint outcome classes.
    pub class_kl: f64,
    pub kl_direction: String,
    pub kl_smoothing: String,
    pub marginals: Vec<MarginalDistance>,
    pub source_rows: usize,
    pub synthetic_rows: usize,
}

impl FidelityReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Upper-triangle Pearson correlations, row-major over column pairs.
pub fn upper_correlations(table: &Table) -> Vec<f64> {
    let d = table.n_cols();
    let mut out = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for a in 0..d {
        for b in a + 1..d {
            out.push(pearson(table.column(a), table.column(b)));
        }
    }
    out
}

/// Two-sample KS statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let sort = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        s
    };
    let (a, b) = (sort(a), sort(b));
    let (mut i, mut j, mut best) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    best
}

fn class_counts(table: &Table, outcomes: &[usize]) -> Vec<f64> {
    let mut counts = vec![0.0; 1 << outcomes.len()];
    for i in 0..table.n_rows() {
        let class =
            outcomes.iter().enumerate().fold(0, |acc, (k, &j)| acc | ((table.column(j)[i] == 1.0) as usize) << k);
        counts[class] += 1.0;
    }
    counts
}

/// KL(p ‖ q) between add-one-smoothed class distributions.
pub fn smoothed_kl(source_counts: &[f64], synthetic_counts: &[f64]) -> f64 {
    let k = source_counts.len() as f64;
    let (ns, nq) = (source_counts.iter().sum::<f64>(), synthetic_counts.iter().sum::<f64>());
    source_counts
        .iter()
        .zip(synthetic_counts)
        .map(|(&cs, &cq)| {
            let p = (cs + 1.0) / (ns + k);
            let q = (cq + 1.0) / (nq + k);
            p * (p / q).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Compares `synthetic` with `source`. Outcome classes are the joint values
/// of the schema's outcome columns (2^k classes for k outcomes).
pub fn fidelity_report(source: &Table, synthetic: &Table, schema: &TabularSchema) -> Result<FidelityReport> {
    source.check_schema(schema)?;
    synthetic.check_schema(schema)?;
    let rs = upper_correlations(source);
    let rq = upper_correlations(synthetic);
    let correlation_mad =
        if rs.is_empty() { 0.0 } else { rs.iter().zip(&rq).map(|(a, b)| (a - b).abs()).sum::<f64>() / rs.len() as f64 };
    let outcomes = schema.outcome_indices();
    let class_kl = if outcomes.is_empty() {
        0.0
    } else {
        smoothed_kl(&class_counts(source, &outcomes), &class_counts(synthetic, &outcomes))
    };
    let marginals = schema
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| MarginalDistance {
            column: c.name.clone(),
            ks: ks_statistic(source.column(j), synthetic.column(j)),
        })
        .collect();
    Ok(FidelityReport {
        correlation_mad,
        class_kl,
        kl_direction: "source||synthetic".into(),
        kl_smoothing: "add-one over outcome classes".into(),
        marginals,
        source_rows: source.n_rows(),
        synthetic_rows: synthetic.n_rows(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_identical_and_disjoint_samples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[5.0, 6.0]), 1.0);
        assert!((ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_is_zero_for_equal_counts_and_positive_otherwise() {
        assert_eq!(smoothed_kl(&[3.0, 5.0], &[3.0, 5.0]), 0.0);
        // p = (4/10, 6/10), q = (2/10, 8/10)
        let expected = 0.4 * (0.4f64 / 0.2).ln() + 0.6 * (0.6f64 / 0.8).ln();
        assert!((smoothed_kl(&[3.0, 5.0], &[1.0, 7.0]) - expected).abs() < 1e-15);
    }
}
