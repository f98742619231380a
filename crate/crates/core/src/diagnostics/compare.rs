use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::{read_metrics, Metrics};

/// Display order of comparison-table blocks.
pub const BLOCK_ORDER: [&str; 8] = ["T1", "N1", "T2", "N2", "STL", "MTL", "HetMTL", "Routing"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub block: usize,
    pub rmse_task1: f64,
    pub rmse_task2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub dataset_hash: String,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    /// Builds the table from already-loaded metrics; rows are stably sorted by
    /// block.
    pub fn from_metrics(metrics: &[Metrics]) -> Result<Self> {
        let first = metrics.first().ok_or_else(|| Error::Comparison("no runs to compare".into()))?;
        if let Some(m) = metrics.iter().find(|m| m.dataset_hash != first.dataset_hash) {
            return Err(Error::Comparison(format!(
                "run {:?} used dataset {} but {:?} used {}",
                m.label, m.dataset_hash, first.label, first.dataset_hash
            )));
        }
        let mut rows: Vec<ComparisonRow> = metrics
            .iter()
            .map(|m| ComparisonRow {
                name: m.label.clone(),
                block: m.block,
                rmse_task1: m.rmse_task1,
                rmse_task2: m.rmse_task2,
            })
            .collect();
        rows.sort_by_key(|r| r.block);
        Ok(ComparisonTable { dataset_hash: first.dataset_hash.clone(), rows })
    }

    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        w.write_record(["name", "rmse_task1", "rmse_task2"]).map_err(|e| Error::format(path, e))?;
        for r in &self.rows {
            w.write_record([r.name.clone(), r.rmse_task1.to_string(), r.rmse_task2.to_string()])
                .map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads `metrics.json` from every run directory; never retrains.
pub fn compare_table(run_dirs: &[PathBuf]) -> Result<ComparisonTable> {
    let metrics = run_dirs.iter().map(|d| read_metrics(d)).collect::<Result<Vec<_>>>()?;
    ComparisonTable::from_metrics(&metrics)
}
