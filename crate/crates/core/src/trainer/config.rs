use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::{ExpertConfig, Slot, TaskParadigm};
use crate::router::RouterConfig;

/// Which slots take part and how their weights are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteSpec {
    /// All eight experts mixed by the learned router.
    Routed,
    /// Only one expert is built and trained; no router.
    Fixed(Slot),
    /// All eight experts with the router replaced by a one-hot on a slot.
    Frozen(Slot),
}

impl RouteSpec {
    pub fn is_routed(self) -> bool {
        matches!(self, RouteSpec::Routed)
    }
}

/// Validation quantity watched by early stopping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopMetric {
    /// Expected heteroscedastic loss.
    Loss,
    /// Squared error of the soft prediction.
    Mse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    /// Fraction of the training set held out for early stopping.
    pub val_fraction: f64,
    pub stop_metric: StopMetric,
    pub seed: u64,
    /// Worker threads for evaluation. Training is always single-threaded.
    pub threads: usize,
    /// Fit in standardized target units; metrics are reported in original units.
    pub standardize_targets: bool,
    pub route: RouteSpec,
    pub model: ExpertConfig,
    pub router: RouterConfig,
    /// Overrides the comparison-table row name.
    pub label: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: 5.0,
            patience: 20,
            val_fraction: 0.1,
            stop_metric: StopMetric::Mse,
            seed: 0,
            threads: 1,
            standardize_targets: true,
            route: RouteSpec::Routed,
            model: ExpertConfig::default(),
            router: RouterConfig::default(),
            label: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::Config("invalid Adam hyperparameters".into()));
        }
        if !(0.0..0.9).contains(&self.val_fraction) {
            return Err(Error::Config(format!("val_fraction {} must lie in [0, 0.9)", self.val_fraction)));
        }
        if !(self.grad_clip >= 0.0) {
            return Err(Error::Config("grad_clip must be non-negative".into()));
        }
        self.model.validate()?;
        self.router.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fixed(slot: Slot) -> Self {
        TrainConfig { route: RouteSpec::Fixed(slot), ..TrainConfig::default() }
    }

    /// Comparison-table row name and its block position.
    pub fn row_label(&self) -> (String, usize) {
        let (name, block) = match self.route {
            RouteSpec::Fixed(slot) => match (slot.paradigm, self.model.homoscedastic) {
                (TaskParadigm::Stl, false) => {
                    let block = match slot.path.to_string().as_str() {
                        "T1" => 0,
                        "N1" => 1,
                        "T2" => 2,
                        _ => 3,
                    };
                    (slot.path.to_string(), block)
                }
                (TaskParadigm::Stl, true) => ("STL".to_string(), 4),
                (TaskParadigm::Mtl, true) => ("MTL".to_string(), 5),
                (TaskParadigm::Mtl, false) => ("HetMTL".to_string(), 6),
            },
            RouteSpec::Routed | RouteSpec::Frozen(_) => (format!("Routing ({})", self.router.mode), 7),
        };
        (self.label.clone().unwrap_or(name), block)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::ModalityPath;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn zero_hidden_units_is_config_error() {
        let mut cfg = TrainConfig::default();
        cfg.model.hidden_dims = vec![64, 0];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn json_uses_dotted_sections() {
        let text = r#"{"epochs": 3, "model": {"hidden_dims": [8]}, "router": {"mode": "hard", "tau_end": 0.2},
                       "route": {"fixed": {"path": "T2", "paradigm": "Mtl"}}}"#;
        let cfg: TrainConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.model.hidden_dims, vec![8]);
        assert_eq!(cfg.model.logvar_clamp, 6.0);
        assert_eq!(cfg.router.tau_end, 0.2);
        assert_eq!(cfg.route, RouteSpec::Fixed(Slot::new(ModalityPath::T2, TaskParadigm::Mtl)));
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epochz": 3}"#).is_err());
    }

    #[test]
    fn labels_follow_block_order() {
        let t1 = TrainConfig::fixed(Slot::new(ModalityPath::T1, TaskParadigm::Stl));
        assert_eq!(t1.row_label(), ("T1".to_string(), 0));
        let mut het = TrainConfig::fixed(Slot::new(ModalityPath::N2, TaskParadigm::Mtl));
        assert_eq!(het.row_label().1, 6);
        het.model.homoscedastic = true;
        assert_eq!(het.row_label(), ("MTL".to_string(), 5));
        assert_eq!(TrainConfig::default().row_label(), ("Routing (soft)".to_string(), 7));
    }
}
