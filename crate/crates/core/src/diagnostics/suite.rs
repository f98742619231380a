use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stats::spearman;
use crate::bench::{Scenario, ScenarioSpec};
use crate::error::{Error, Result};
use crate::experts::{ModalityPath, Slot, TaskParadigm, NUM_SLOTS};
use crate::trainer::{train, write_run, Evaluation, Metrics, TrainConfig};

/// Slots need this many hard-routed test samples to enter the
/// probability–error rank correlation.
pub const MIN_ROUTE_SAMPLES: usize = 20;
/// Paradigm mass a scenario's preferred paradigm must exceed.
pub const MASS_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    /// Seeds run per scenario: `seed, seed + 1, ...`.
    pub seeds: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub scenarios: Vec<Scenario>,
    /// Template for every run; its seed is replaced per run.
    pub config: TrainConfig,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seeds: 3,
            n_train: 1000,
            n_test: 1000,
            scenarios: vec![Scenario::S1, Scenario::S2, Scenario::S3],
            config: TrainConfig::default(),
        }
    }
}

/// Rank correlation between slot probability mass and slot error on the
/// hard-routed test evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Slots with at least [`MIN_ROUTE_SAMPLES`] hard-routed samples.
    pub slots: Vec<Slot>,
    pub mass: Vec<f64>,
    pub mean_abs_err: Vec<f64>,
    /// `None` when fewer than two slots qualify.
    pub spearman: Option<f64>,
}

impl Alignment {
    /// Non-positive correlation; vacuously true when undefined.
    pub fn passed(&self) -> bool {
        self.spearman.is_none_or(|r| r <= 0.0)
    }
}

pub fn alignment(metrics: &Metrics, eval: &Evaluation) -> Alignment {
    let mut out = Alignment { slots: vec![], mass: vec![], mean_abs_err: vec![], spearman: None };
    for slot in Slot::all() {
        let errs: Vec<f64> =
            eval.predictions.iter().filter(|p| p.selected == slot).map(|p| p.hard_abs_error()).collect();
        if errs.len() >= MIN_ROUTE_SAMPLES {
            out.slots.push(slot);
            out.mass.push(metrics.joint_pmf[slot.index()]);
            out.mean_abs_err.push(errs.iter().sum::<f64>() / errs.len() as f64);
        }
    }
    out.spearman = spearman(&out.mass, &out.mean_abs_err);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRun {
    pub scenario: Scenario,
    pub seed: u64,
    pub run_dir: PathBuf,
    pub joint_pmf: [f64; NUM_SLOTS],
    pub mtl_mass: f64,
    pub stl_mass: f64,
    pub path_marginals: [f64; 4],
    pub rmse: [f64; 2],
    pub claim: String,
    pub claim_passed: bool,
    pub alignment: Alignment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioVerdict {
    pub scenario: Scenario,
    pub claim: String,
    pub runs_passed: usize,
    pub runs: usize,
    pub passed: bool,
    pub alignment_passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub runs: Vec<SuiteRun>,
    pub scenarios: Vec<ScenarioVerdict>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.scenarios.iter().all(|s| s.passed && s.alignment_passed)
    }
}

/// The directional claim checked for a scenario and whether `m` meets it.
pub fn scenario_claim(scenario: Scenario, m: &Metrics) -> (String, bool) {
    match scenario {
        Scenario::S1 | Scenario::General => ("MTL mass > 0.5".into(), m.mass(TaskParadigm::Mtl) > MASS_THRESHOLD),
        Scenario::S2 => ("STL mass > 0.5".into(), m.mass(TaskParadigm::Stl) > MASS_THRESHOLD),
        Scenario::S3 => {
            let pm = ModalityPath::ALL.map(|p| m.path_marginal(p));
            let t2 = pm[ModalityPath::T2.index()];
            let largest = ModalityPath::ALL.iter().filter(|p| **p != ModalityPath::T2).all(|p| t2 > pm[p.index()]);
            let fused = t2 + pm[ModalityPath::N2.index()] > pm[ModalityPath::T1.index()] + pm[ModalityPath::N1.index()];
            ("T2 largest path marginal and T2+N2 > T1+N1".into(), largest && fused)
        }
    }
}

/// A claim holds for a scenario when at least two thirds of its runs meet it.
pub fn majority(passed: usize, runs: usize) -> bool {
    runs > 0 && 3 * passed >= 2 * runs
}

/// Trains a routed model on every (scenario, seed) pair, writes each run
/// under `out/<scenario>/seed_<k>/` and checks the directional claims.
pub fn scenario_suite(seed: u64, out: &Path, options: &SuiteOptions) -> Result<SuiteReport> {
    if options.seeds == 0 {
        return Err(Error::Config("suite needs at least one seed".into()));
    }
    let mut runs = Vec::new();
    for &scenario in &options.scenarios {
        for k in 0..options.seeds as u64 {
            let run_seed = seed + k;
            let spec = ScenarioSpec::sample(scenario, run_seed);
            let (train_set, test_set) = spec.generate_split(options.n_train, options.n_test)?;
            let config = TrainConfig { seed: run_seed, ..options.config.clone() };
            let (model, metrics, eval) = train(&config, &train_set, &test_set)?;
            let run_dir = out.join(scenario.to_string()).join(format!("seed_{run_seed}"));
            write_run(&run_dir, &config, &model, &metrics, &eval)?;
            let (claim, claim_passed) = scenario_claim(scenario, &metrics);
            runs.push(SuiteRun {
                scenario,
                seed: run_seed,
                run_dir,
                joint_pmf: metrics.joint_pmf,
                mtl_mass: metrics.mass(TaskParadigm::Mtl),
                stl_mass: metrics.mass(TaskParadigm::Stl),
                path_marginals: ModalityPath::ALL.map(|p| metrics.path_marginal(p)),
                rmse: metrics.rmse(),
                claim,
                claim_passed,
                alignment: alignment(&metrics, &eval),
            });
        }
    }
    let scenarios = options
        .scenarios
        .iter()
        .map(|&scenario| {
            let mine: Vec<&SuiteRun> = runs.iter().filter(|r| r.scenario == scenario).collect();
            let runs_passed = mine.iter().filter(|r| r.claim_passed).count();
            ScenarioVerdict {
                scenario,
                claim: mine[0].claim.clone(),
                runs_passed,
                runs: mine.len(),
                passed: majority(runs_passed, mine.len()),
                alignment_passed: mine.iter().all(|r| r.alignment.passed()),
            }
        })
        .collect();
    let report = SuiteReport { seed, runs, scenarios };
    let path = out.join("suite.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::format(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_of_three_is_a_majority() {
        assert!(majority(2, 3));
        assert!(majority(3, 3));
        assert!(!majority(1, 3));
        assert!(!majority(0, 0));
    }
}
