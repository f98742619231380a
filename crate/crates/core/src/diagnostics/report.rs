use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stats::weighted_quantile;
use crate::error::{Error, Result};
use crate::experts::{ModalityPath, Slot, NUM_SLOTS};
use crate::router::{argmax, RoutingMode};
use crate::trainer::RunFiles;

pub const JOINT_PMF_FILE: &str = "joint_pmf.csv";
pub const MODALITY_ROUTING_FILE: &str = "modality_routing.csv";
pub const SANKEY_FILE: &str = "sankey.json";
pub const ROUTE_ERRORS_FILE: &str = "route_errors.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SankeyEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Root → modality path → expert slot flows of the average joint PMF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sankey {
    pub nodes: Vec<String>,
    pub edges: Vec<SankeyEdge>,
}

impl Sankey {
    pub fn from_joint(joint: &[f64; NUM_SLOTS]) -> Self {
        let mut nodes = vec!["root".to_string()];
        nodes.extend(ModalityPath::ALL.iter().map(|p| p.to_string()));
        nodes.extend(Slot::all().iter().map(|s| s.to_string()));
        let mut edges: Vec<SankeyEdge> = ModalityPath::ALL
            .iter()
            .map(|p| SankeyEdge {
                source: "root".into(),
                target: p.to_string(),
                weight: joint[2 * p.index()] + joint[2 * p.index() + 1],
            })
            .collect();
        edges.extend(Slot::all().iter().map(|s| SankeyEdge {
            source: s.path.to_string(),
            target: s.to_string(),
            weight: joint[s.index()],
        }));
        Sankey { nodes, edges }
    }

    pub fn outflow(&self, node: &str) -> f64 {
        self.edges.iter().filter(|e| e.source == node).map(|e| e.weight).sum()
    }

    pub fn inflow(&self, node: &str) -> f64 {
        self.edges.iter().filter(|e| e.target == node).map(|e| e.weight).sum()
    }
}

/// Absolute-error summary of one route.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteErrorSummary {
    pub slot: Slot,
    pub mode: RoutingMode,
    /// Samples routed to the slot (hard) or with nonzero weight on it (soft).
    pub count: usize,
    pub mean_abs_err: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

/// Per-sample rows of `routing.csv` and `predictions.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecords {
    pub pi_mod: Vec<[f64; 4]>,
    pub joint: Vec<[f64; NUM_SLOTS]>,
    pub selected: Vec<Slot>,
    pub y: Vec<[f64; 2]>,
    pub hard: Vec<[f64; 2]>,
    pub slots: Vec<[Option<[f64; 2]>; NUM_SLOTS]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteReport {
    pub joint_pmf: [f64; NUM_SLOTS],
    pub modality_routing: Vec<[f64; 4]>,
    /// Position of each sample after sorting by dominant path, then by
    /// descending dominant probability.
    pub cluster_order: Vec<usize>,
    pub sankey: Sankey,
    pub route_errors: Vec<RouteErrorSummary>,
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::io(&path, std::io::Error::new(std::io::ErrorKind::NotFound, format!("missing {name}"))));
    }
    Ok(path)
}

fn read_rows(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    let header = r.headers().map_err(|e| Error::format(path, e))?.clone();
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| Error::format(path, e))?;
    Ok((header, rows))
}

fn column(path: &Path, header: &csv::StringRecord, name: &str) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| Error::format(path, format!("missing column {name}")))
}

fn parse(path: &Path, field: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|e| Error::format(path, format!("{field:?}: {e}")))
}

/// Reads the per-sample routing and prediction files of a run directory.
pub fn read_run_records(dir: &Path) -> Result<RunRecords> {
    let path = require(dir, RunFiles::ROUTING)?;
    let (header, rows) = read_rows(&path)?;
    let pi_cols: Vec<usize> =
        ModalityPath::ALL.iter().map(|p| column(&path, &header, &format!("pi_{p}"))).collect::<Result<_>>()?;
    let joint_cols: Vec<usize> =
        Slot::all().iter().map(|s| column(&path, &header, &format!("joint_{s}"))).collect::<Result<_>>()?;
    let sel_col = column(&path, &header, "selected")?;
    let mut rec =
        RunRecords { pi_mod: vec![], joint: vec![], selected: vec![], y: vec![], hard: vec![], slots: vec![] };
    for row in &rows {
        let mut pi = [0.0; 4];
        for (k, c) in pi_cols.iter().enumerate() {
            pi[k] = parse(&path, &row[*c])?;
        }
        let mut joint = [0.0; NUM_SLOTS];
        for (k, c) in joint_cols.iter().enumerate() {
            joint[k] = parse(&path, &row[*c])?;
        }
        rec.pi_mod.push(pi);
        rec.joint.push(joint);
        rec.selected.push(row[sel_col].parse().map_err(|e| Error::format(&path, e))?);
    }

    let path = require(dir, RunFiles::PREDICTIONS)?;
    let (header, rows) = read_rows(&path)?;
    if rows.len() != rec.joint.len() {
        return Err(Error::format(&path, format!("{} rows but routing.csv has {}", rows.len(), rec.joint.len())));
    }
    let idx = |name: &str| column(&path, &header, name);
    let (y1, y2, h1, h2) = (idx("y1")?, idx("y2")?, idx("hard_y1")?, idx("hard_y2")?);
    let slot_cols: Vec<(usize, usize)> =
        Slot::all().iter().map(|s| Ok((idx(&format!("{s}_y1"))?, idx(&format!("{s}_y2"))?))).collect::<Result<_>>()?;
    for row in &rows {
        rec.y.push([parse(&path, &row[y1])?, parse(&path, &row[y2])?]);
        rec.hard.push([parse(&path, &row[h1])?, parse(&path, &row[h2])?]);
        let mut slots = [None; NUM_SLOTS];
        for (k, &(a, b)) in slot_cols.iter().enumerate() {
            if !row[a].is_empty() {
                slots[k] = Some([parse(&path, &row[a])?, parse(&path, &row[b])?]);
            }
        }
        rec.slots.push(slots);
    }
    if rec.joint.is_empty() {
        return Err(Error::format(dir.join(RunFiles::ROUTING), "no samples"));
    }
    Ok(rec)
}

fn abs_err(p: [f64; 2], y: [f64; 2]) -> f64 {
    0.5 * ((p[0] - y[0]).abs() + (p[1] - y[1]).abs())
}

fn summarize(slot: Slot, mode: RoutingMode, errors: &[f64], weights: &[f64]) -> RouteErrorSummary {
    let total: f64 = weights.iter().sum();
    RouteErrorSummary {
        slot,
        mode,
        count: weights.iter().filter(|w| **w > 0.0).count(),
        mean_abs_err: errors.iter().zip(weights).map(|(e, w)| e * w).sum::<f64>() / total,
        q25: weighted_quantile(errors, weights, 0.25),
        q50: weighted_quantile(errors, weights, 0.5),
        q75: weighted_quantile(errors, weights, 0.75),
    }
}

/// Per-route error summaries. Hard mode groups samples by selected slot and
/// uses the hard prediction; soft mode weights every slot's own prediction
/// error by its joint probability. Errors average the two tasks.
pub fn route_errors(rec: &RunRecords) -> Vec<RouteErrorSummary> {
    let mut out = Vec::new();
    for slot in Slot::all() {
        let errs: Vec<f64> =
            (0..rec.y.len()).filter(|&i| rec.selected[i] == slot).map(|i| abs_err(rec.hard[i], rec.y[i])).collect();
        if !errs.is_empty() {
            out.push(summarize(slot, RoutingMode::Hard, &errs, &vec![1.0; errs.len()]));
        }
    }
    for slot in Slot::all() {
        let (mut errs, mut weights) = (Vec::new(), Vec::new());
        for i in 0..rec.y.len() {
            if let Some(p) = rec.slots[i][slot.index()] {
                errs.push(abs_err(p, rec.y[i]));
                weights.push(rec.joint[i][slot.index()]);
            }
        }
        if weights.iter().any(|w| *w > 0.0) {
            out.push(summarize(slot, RoutingMode::Soft, &errs, &weights));
        }
    }
    out
}

/// Sorts samples by dominant path index, then by descending dominant
/// probability, and returns each sample's position.
pub fn cluster_order(pi_mod: &[[f64; 4]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pi_mod.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (argmax(&pi_mod[a]), argmax(&pi_mod[b]));
        da.cmp(&db).then(pi_mod[b][db].partial_cmp(&pi_mod[a][da]).expect("finite")).then(a.cmp(&b))
    });
    let mut pos = vec![0; order.len()];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k;
    }
    pos
}

pub fn build_report(rec: &RunRecords) -> RouteReport {
    let n = rec.joint.len() as f64;
    let mut joint_pmf = [0.0; NUM_SLOTS];
    for row in &rec.joint {
        for (acc, v) in joint_pmf.iter_mut().zip(row) {
            *acc += v;
        }
    }
    joint_pmf.iter_mut().for_each(|v| *v /= n);
    RouteReport {
        joint_pmf,
        modality_routing: rec.pi_mod.clone(),
        cluster_order: cluster_order(&rec.pi_mod),
        sankey: Sankey::from_joint(&joint_pmf),
        route_errors: route_errors(rec),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format(path, e))
}

impl RouteReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(JOINT_PMF_FILE);
        let mut w = writer(&path)?;
        let err = |e: csv::Error| Error::format(&path, e);
        w.write_record(["path", "paradigm", "probability"]).map_err(err)?;
        for s in Slot::all() {
            w.write_record([s.path.to_string(), s.paradigm.to_string(), self.joint_pmf[s.index()].to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join(MODALITY_ROUTING_FILE);
        let mut w = writer(&path)?;
        let err = |e: csv::Error| Error::format(&path, e);
        let mut header = vec!["sample".to_string()];
        header.extend(ModalityPath::ALL.iter().map(|p| p.to_string()));
        header.push("cluster_order".into());
        w.write_record(&header).map_err(err)?;
        for (i, row) in self.modality_routing.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            rec.push(self.cluster_order[i].to_string());
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join(SANKEY_FILE);
        let text = serde_json::to_string_pretty(&self.sankey).map_err(|e| Error::format(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;

        let path = dir.join(ROUTE_ERRORS_FILE);
        let mut w = writer(&path)?;
        let err = |e: csv::Error| Error::format(&path, e);
        w.write_record(["route", "mode", "count", "mean_abs_err", "q25", "q50", "q75"]).map_err(err)?;
        for r in &self.route_errors {
            w.write_record([
                r.slot.to_string(),
                r.mode.to_string(),
                r.count.to_string(),
                r.mean_abs_err.to_string(),
                r.q25.to_string(),
                r.q50.to_string(),
                r.q75.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }
}

/// Reads a run directory and writes the report files next to its inputs.
pub fn route_report(run_dir: &Path) -> Result<RouteReport> {
    let report = build_report(&read_run_records(run_dir)?);
    report.write(run_dir)?;
    Ok(report)
}
