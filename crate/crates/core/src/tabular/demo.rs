use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use super::table::{ColumnKind, ColumnSpec, Table, TabularSchema};
use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const DEMO_ROWS: usize = 300;
pub const DEMO_SEED: u64 = 7;

const DEMO_CSV: &str = include_str!("../../data/demo_table.csv");
const DEMO_SCHEMA: &str = include_str!("../../data/demo_schema.json");

/// Two-factor loadings of each demo column on a latent (distress,
/// resources) pair; the rest of each column's unit variance is unique noise.
const LOADINGS: [(&str, ColumnKind, f64, f64); 10] = [
    ("age", ColumnKind::Continuous, 0.1, 0.3),
    ("sessions", ColumnKind::Continuous, 0.4, 0.1),
    ("sleep_hours", ColumnKind::Continuous, -0.5, 0.3),
    ("stress", ColumnKind::Continuous, 0.7, -0.2),
    ("support", ColumnKind::Continuous, -0.3, 0.6),
    ("irritability", ColumnKind::Binary, 0.5, -0.1),
    ("avoidance", ColumnKind::Binary, 0.45, -0.3),
    ("rumination", ColumnKind::Binary, 0.6, 0.0),
    ("depression_high", ColumnKind::Binary, 0.7, -0.3),
    ("anxiety_high", ColumnKind::Binary, 0.65, 0.1),
];

/// Location/scale for continuous columns, threshold for binary ones.
const MAPS: [(f64, f64); 10] = [
    (42.0, 12.0),
    (12.0, 5.0),
    (6.8, 1.1),
    (20.0, 6.0),
    (3.0, 1.0),
    (0.3, 0.0),
    (0.5, 0.0),
    (0.0, 0.0),
    (0.2, 0.0),
    (0.4, 0.0),
];

/// Latent correlation matrix `ΛΛᵀ + diag(1 − rowsum Λ²)` of the demo table.
pub fn demo_correlation() -> Vec<Vec<f64>> {
    LOADINGS
        .iter()
        .map(|a| LOADINGS.iter().map(|b| if a.0 == b.0 { 1.0 } else { a.2 * b.2 + a.3 * b.3 }).collect())
        .collect()
}

pub fn demo_schema() -> TabularSchema {
    serde_json::from_str(DEMO_SCHEMA).expect("bundled schema parses")
}

/// Regenerates the demo table from its latent factor model.
pub fn generate_demo_table(rows: usize, seed: u64) -> Result<Table> {
    let mut rng = rng_from(seed, &[0xde70]);
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let f1: f64 = StandardNormal.sample(&mut rng);
        let f2: f64 = StandardNormal.sample(&mut rng);
        let row = LOADINGS
            .iter()
            .zip(MAPS)
            .map(|(&(_, kind, l1, l2), (loc, scale))| {
                let e: f64 = StandardNormal.sample(&mut rng);
                let z = l1 * f1 + l2 * f2 + (1.0 - l1 * l1 - l2 * l2).sqrt() * e;
                match kind {
                    ColumnKind::Continuous => ((loc + scale * z) * 100.0).round() / 100.0,
                    ColumnKind::Binary => f64::from(u8::from(z > loc)),
                }
            })
            .collect();
        data.push(row);
    }
    Table::from_rows(LOADINGS.iter().map(|l| l.0.to_string()).collect(), &data)
}

/// Schema matching [`generate_demo_table`].
pub fn generated_demo_schema() -> TabularSchema {
    TabularSchema {
        columns: LOADINGS.iter().map(|&(name, kind, _, _)| ColumnSpec { name: name.into(), kind }).collect(),
        outcomes: vec!["depression_high".into(), "anxiety_high".into()],
    }
}

/// The bundled 300-row demo table.
pub fn demo_table() -> Table {
    Table::from_reader(DEMO_CSV.as_bytes(), Path::new("demo_table.csv")).expect("bundled table parses")
}

/// Writes the bundled demo table and schema into `dir`.
pub fn write_demo(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    demo_table().write_csv(&dir.join("demo_table.csv"))?;
    demo_schema().save(&dir.join("demo_schema.json"))
}
