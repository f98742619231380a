use crate::tabular::{average_ranks, pearson};

/// Lower weighted quantile: the smallest value whose cumulative weight
/// reaches `q` of the total. With unit weights this is the `⌈q·n⌉`-th
/// smallest value.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let total: f64 = weights.iter().sum();
    let target = q * total;
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if acc >= target && weights[i] > 0.0 {
            return values[i];
        }
    }
    order.last().map_or(f64::NAN, |&i| values[i])
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    weighted_quantile(values, &vec![1.0; values.len()], q)
}

/// Spearman rank correlation (average ranks for ties); `None` for fewer
/// than two points.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || a.len() != b.len() {
        return None;
    }
    Some(pearson(&average_ranks(a), &average_ranks(b)))
}
