use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::table::{ColumnKind, Table, TabularSchema};
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};

/// Diagonal jitter added to covariance and correlation matrices.
pub const COVARIANCE_JITTER: f64 = 1e-6;
/// Binary columns are thresholded here after generation.
pub const BINARY_THRESHOLD: f64 = 0.5;

const GAUSSIAN_TAG: u64 = 0x6a55;
const COPULA_TAG: u64 = 0xc0b1;
const KDE_TAG: u64 = 0x4de;
const SHUFFLE_TAG: u64 = 0x5401;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthesisMethod {
    Gaussian,
    Copula,
    Kde,
}

impl SynthesisMethod {
    pub const ALL: [SynthesisMethod; 3] = [SynthesisMethod::Gaussian, SynthesisMethod::Copula, SynthesisMethod::Kde];

    pub fn synthesize(self, source: &Table, schema: &TabularSchema, n: usize, seed: u64) -> Result<Table> {
        match self {
            SynthesisMethod::Gaussian => gaussian_synthesize(source, schema, n, seed),
            SynthesisMethod::Copula => copula_synthesize(source, schema, n, seed),
            SynthesisMethod::Kde => kde_synthesize(source, schema, n, seed, &KdeOptions::default()),
        }
    }
}

impl fmt::Display for SynthesisMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisMethod::Gaussian => "gaussian",
            SynthesisMethod::Copula => "copula",
            SynthesisMethod::Kde => "kde",
        })
    }
}

impl FromStr for SynthesisMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SynthesisMethod::Gaussian),
            "copula" => Ok(SynthesisMethod::Copula),
            "kde" => Ok(SynthesisMethod::Kde),
            other => Err(Error::Config(format!("unknown synthesis method {other:?}"))),
        }
    }
}

/// Source rows sharing one combination of outcome values.
struct Stratum {
    key: Vec<f64>,
    rows: Vec<usize>,
}

/// Groups rows by outcome class, ordered by class key. Without outcome
/// columns there is a single stratum.
fn strata(source: &Table, outcomes: &[usize]) -> Vec<Stratum> {
    let mut out: Vec<Stratum> = Vec::new();
    for i in 0..source.n_rows() {
        let key: Vec<f64> = outcomes.iter().map(|&j| source.column(j)[i]).collect();
        match out.iter_mut().find(|s| s.key == key) {
            Some(s) => s.rows.push(i),
            None => out.push(Stratum { key, rows: vec![i] }),
        }
    }
    out.sort_by(|a, b| a.key.partial_cmp(&b.key).expect("finite keys"));
    out
}

/// Splits `n` proportionally to `sizes` by largest remainder; ties go to the
/// earlier stratum.
pub fn allocate(n: usize, sizes: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let exact: Vec<f64> = sizes.iter().map(|&s| n as f64 * s as f64 / total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &k in order.iter().take(short) {
        counts[k] += 1;
    }
    counts
}

fn threshold_binary(schema: &TabularSchema, columns: &mut [Vec<f64>]) {
    for (j, col) in columns.iter_mut().enumerate() {
        if schema.is_binary(j) {
            for v in col.iter_mut() {
                *v = if *v >= BINARY_THRESHOLD { 1.0 } else { 0.0 };
            }
        }
    }
}

fn check_source(source: &Table, schema: &TabularSchema, min_rows: usize) -> Result<()> {
    source.check_schema(schema).map_err(|e| Error::Synthesis(e.to_string()))?;
    if source.n_rows() < min_rows {
        return Err(Error::Synthesis(format!("source has {} rows, need at least {min_rows}", source.n_rows())));
    }
    Ok(())
}

/// Generated rows of every stratum, then shuffled into one table.
fn assemble(schema: &TabularSchema, parts: Vec<Vec<Vec<f64>>>, seed: u64) -> Result<Table> {
    let mut rows: Vec<Vec<f64>> = parts.into_iter().flatten().collect();
    rows.shuffle(&mut rng_from(seed, &[SHUFFLE_TAG]));
    let names = schema.names().iter().map(|s| s.to_string()).collect();
    if rows.is_empty() {
        return Table::new(names, vec![Vec::new(); schema.columns.len()]);
    }
    Table::from_rows(names, &rows)
}

fn cholesky(mut m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    for k in 0..m.nrows() {
        m[(k, k)] += COVARIANCE_JITTER;
    }
    Cholesky::new(m)
        .map(|c| c.l())
        .ok_or_else(|| Error::Synthesis(format!("{what} matrix is not positive definite after jitter")))
}

fn standard_normal_vec(k: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(rng)))
}

/// Sample covariance (divisor m−1); zero for a single row.
fn covariance(data: &[Vec<f64>], mean: &[f64]) -> DMatrix<f64> {
    let d = mean.len();
    let m = data.len();
    let mut cov = DMatrix::zeros(d, d);
    if m < 2 {
        return cov;
    }
    for row in data {
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[(a, b)] /= (m - 1) as f64;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}

fn feature_columns(schema: &TabularSchema) -> Vec<usize> {
    let outcomes = schema.outcome_indices();
    (0..schema.columns.len()).filter(|j| !outcomes.contains(j)).collect()
}

/// Multivariate-normal synthesis, stratified by outcome class: each class
/// is fitted with its own mean and jittered covariance and receives a share
/// of `n` proportional to its size.
pub fn gaussian_synthesize(source: &Table, schema: &TabularSchema, n: usize, seed: u64) -> Result<Table> {
    check_source(source, schema, 2)?;
    let outcomes = schema.outcome_indices();
    let features = feature_columns(schema);
    let groups = strata(source, &outcomes);
    let counts = allocate(n, &groups.iter().map(|g| g.rows.len()).collect::<Vec<_>>());
    let mut parts = Vec::with_capacity(groups.len());
    for (k, (g, &count)) in groups.iter().zip(&counts).enumerate() {
        let data: Vec<Vec<f64>> =
            g.rows.iter().map(|&i| features.iter().map(|&j| source.column(j)[i]).collect()).collect();
        let d = features.len();
        let mean: Vec<f64> = (0..d).map(|a| data.iter().map(|r| r[a]).sum::<f64>() / data.len() as f64).collect();
        let l = cholesky(covariance(&data, &mean), "covariance")?;
        let mut rng = rng_from(seed, &[GAUSSIAN_TAG, k as u64]);
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let x = &l * standard_normal_vec(d, &mut rng);
            let mut row = vec![0.0; schema.columns.len()];
            for (a, &j) in features.iter().enumerate() {
                row[j] = mean[a] + x[a];
            }
            for (o, &j) in outcomes.iter().enumerate() {
                row[j] = g.key[o];
            }
            rows.push(row);
        }
        parts.push(rows);
    }
    let mut table = assemble(schema, parts, seed)?;
    let mut columns = table.columns().to_vec();
    threshold_binary(schema, &mut columns);
    table = Table::new(table.names().to_vec(), columns)?;
    Ok(table)
}

/// Average ranks (1-based); ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Normal scores `Φ⁻¹(rank / (m + 1))` with average ranks.
pub fn normal_scores(values: &[f64]) -> Vec<f64> {
    let std = Normal::standard();
    let m = values.len() as f64;
    average_ranks(values).into_iter().map(|r| std.inverse_cdf(r / (m + 1.0))).collect()
}

/// Empirical quantile: the `⌈u·m⌉`-th smallest value, clamped to the sample.
pub fn empirical_quantile(sorted: &[f64], u: f64) -> f64 {
    let m = sorted.len();
    let k = (u * m as f64).ceil() as usize;
    sorted[k.clamp(1, m) - 1]
}

/// Pearson correlation; 0 when either input has no spread.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Gaussian-copula synthesis, stratified by outcome class: columns are
/// mapped to normal scores, their correlation is sampled and each value is
/// mapped back through the class's empirical quantile function.
pub fn copula_synthesize(source: &Table, schema: &TabularSchema, n: usize, seed: u64) -> Result<Table> {
    check_source(source, schema, 2)?;
    for (j, c) in schema.columns.iter().enumerate() {
        let col = source.column(j);
        if c.kind == ColumnKind::Continuous && col.iter().all(|v| *v == col[0]) {
            return Err(Error::Synthesis(format!("column {:?} is constant; copula needs two distinct values", c.name)));
        }
    }
    let outcomes = schema.outcome_indices();
    let features = feature_columns(schema);
    let groups = strata(source, &outcomes);
    let counts = allocate(n, &groups.iter().map(|g| g.rows.len()).collect::<Vec<_>>());
    let std = Normal::standard();
    let mut parts = Vec::with_capacity(groups.len());
    for (k, (g, &count)) in groups.iter().zip(&counts).enumerate() {
        let cols: Vec<Vec<f64>> =
            features.iter().map(|&j| g.rows.iter().map(|&i| source.column(j)[i]).collect()).collect();
        let scores: Vec<Vec<f64>> = cols.iter().map(|c| normal_scores(c)).collect();
        let d = features.len();
        let corr = DMatrix::from_fn(d, d, |a, b| if a == b { 1.0 } else { pearson(&scores[a], &scores[b]) });
        let l = cholesky(corr, "score correlation")?;
        let sorted: Vec<Vec<f64>> = cols
            .into_iter()
            .map(|mut c| {
                c.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                c
            })
            .collect();
        let mut rng = rng_from(seed, &[COPULA_TAG, k as u64]);
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let z = &l * standard_normal_vec(d, &mut rng);
            let mut row = vec![0.0; schema.columns.len()];
            for (a, &j) in features.iter().enumerate() {
                row[j] = empirical_quantile(&sorted[a], std.cdf(z[a]));
            }
            for (o, &j) in outcomes.iter().enumerate() {
                row[j] = g.key[o];
            }
            rows.push(row);
        }
        parts.push(rows);
    }
    assemble(schema, parts, seed)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KdeOptions {
    /// Replaces the rule-of-thumb bandwidth.
    pub bandwidth: Option<f64>,
}

/// `h = m^(−1/(d+4))` for `m` source rows in `d` dimensions.
pub fn kde_bandwidth(m: usize, d: usize) -> f64 {
    (m as f64).powf(-1.0 / (d as f64 + 4.0))
}

/// Smoothed-bootstrap KDE synthesis: a uniformly drawn source row plus
/// `h·N(0, I)` noise in standardized space, de-standardized, with binary
/// columns thresholded afterwards. All columns, outcomes included, are
/// noised, so the class distribution is inherited rather than enforced.
pub fn kde_synthesize(
    source: &Table,
    schema: &TabularSchema,
    n: usize,
    seed: u64,
    options: &KdeOptions,
) -> Result<Table> {
    check_source(source, schema, 1)?;
    let m = source.n_rows();
    let d = source.n_cols();
    let h = options.bandwidth.unwrap_or_else(|| kde_bandwidth(m, d));
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Synthesis(format!("bandwidth {h} must be finite and non-negative")));
    }
    let stats: Vec<(f64, f64)> = source
        .columns()
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / m as f64;
            let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
        })
        .collect();
    let mut rng = rng_from(seed, &[KDE_TAG]);
    let mut columns = vec![Vec::with_capacity(n); d];
    for _ in 0..n {
        let i = rng.random_range(0..m);
        for (j, col) in columns.iter_mut().enumerate() {
            let (mean, sd) = stats[j];
            let noise: f64 = StandardNormal.sample(&mut rng);
            let z = (source.column(j)[i] - mean) / sd + h * noise;
            col.push(if h == 0.0 { source.column(j)[i] } else { mean + sd * z });
        }
    }
    threshold_binary(schema, &mut columns);
    Table::new(source.names().to_vec(), columns)
}
