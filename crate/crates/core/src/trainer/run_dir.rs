use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::Evaluation;
use super::model::{Model, TargetScale};
use super::train::Metrics;
use crate::ad::Checkpoint;
use crate::error::{Error, Result};
use crate::experts::{ModalityPath, Slot};

/// File names inside a run directory.
pub struct RunFiles;

impl RunFiles {
    pub const METRICS: &'static str = "metrics.json";
    pub const CHECKPOINT: &'static str = "checkpoint";
    pub const MANIFEST: &'static str = "run.json";
    pub const LOSS_CURVE: &'static str = "loss_curve.csv";
    pub const ROUTING: &'static str = "routing.csv";
    pub const PREDICTIONS: &'static str = "predictions.csv";
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: TrainConfig,
    d_num: usize,
    d_text: usize,
    scale: TargetScale,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Writes metrics, checkpoint, manifest and the per-sample CSVs into `dir`.
pub fn write_run(dir: &Path, config: &TrainConfig, model: &Model, metrics: &Metrics, eval: &Evaluation) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(RunFiles::METRICS), metrics)?;
    model.store.to_checkpoint().save(&dir.join(RunFiles::CHECKPOINT))?;
    let manifest =
        Manifest { config: config.clone(), d_num: model.d_num(), d_text: model.d_text(), scale: model.scale };
    write_json(&dir.join(RunFiles::MANIFEST), &manifest)?;

    let path = dir.join(RunFiles::LOSS_CURVE);
    let mut w = csv_writer(&path)?;
    let io = |e: csv::Error| Error::format(&path, e);
    w.write_record(["epoch", "train_loss", "val_loss", "tau", "entropy_coef"]).map_err(io)?;
    for r in &metrics.loss_curve {
        w.write_record([r.epoch.to_string(), fmt(r.train_loss), fmt(r.val_loss), fmt(r.tau), fmt(r.entropy_coef)])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(RunFiles::ROUTING);
    let mut w = csv_writer(&path)?;
    let io = |e: csv::Error| Error::format(&path, e);
    let mut header = vec!["sample".to_string()];
    header.extend(ModalityPath::ALL.iter().map(|p| format!("pi_{p}")));
    header.extend(Slot::all().iter().map(|s| format!("joint_{s}")));
    header.push("selected".into());
    w.write_record(&header).map_err(io)?;
    for (i, p) in eval.predictions.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.state.pi_mod.iter().map(|v| fmt(*v)));
        row.extend(p.state.joint.iter().map(|v| fmt(*v)));
        row.push(p.selected.to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(RunFiles::PREDICTIONS);
    let mut w = csv_writer(&path)?;
    let io = |e: csv::Error| Error::format(&path, e);
    let mut header: Vec<String> =
        ["sample", "y1", "y2", "soft_y1", "soft_y2", "hard_y1", "hard_y2"].iter().map(|s| s.to_string()).collect();
    for s in Slot::all() {
        header.push(format!("{s}_y1"));
        header.push(format!("{s}_y2"));
    }
    w.write_record(&header).map_err(io)?;
    for (i, p) in eval.predictions.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            fmt(p.y[0]),
            fmt(p.y[1]),
            fmt(p.soft[0]),
            fmt(p.soft[1]),
            fmt(p.hard[0]),
            fmt(p.hard[1]),
        ];
        for s in p.slots {
            match s {
                Some([a, b]) => row.extend([fmt(a), fmt(b)]),
                None => row.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::io(&path, std::io::Error::new(std::io::ErrorKind::NotFound, format!("missing {name}"))));
    }
    Ok(path)
}

pub fn read_metrics(dir: &Path) -> Result<Metrics> {
    let path = require(dir, RunFiles::METRICS)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
}

/// Rebuilds a trained model from a run directory.
pub fn load_model(dir: &Path) -> Result<Model> {
    let path = require(dir, RunFiles::MANIFEST)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
    let mut model = Model::new(&manifest.config, manifest.d_num, manifest.d_text)?;
    model.store.load_checkpoint(&Checkpoint::load(&require(dir, RunFiles::CHECKPOINT)?)?)?;
    model.scale = manifest.scale;
    Ok(model)
}
