// A reduced scenario suite: one seed per scenario on small datasets.

use adaptive_routing::diagnostics::{scenario_suite, SuiteOptions};
use adaptive_routing::trainer::TrainConfig;

pub fn run_example() -> adaptive_routing::Result<()> {
    let options = SuiteOptions {
        seeds: 1,
        n_train: 300,
        n_test: 300,
        config: TrainConfig { epochs: 15, ..TrainConfig::default() },
        ..SuiteOptions::default()
    };
    let dir = std::env::temp_dir().join(format!("adaptive-routing-suite-{}", std::process::id()));
    let report = scenario_suite(0, &dir, &options)?;
    for run in &report.runs {
        println!(
            "{} seed {}: MTL {:.3}  paths {:?}  claim {} -> {}",
            run.scenario,
            run.seed,
            run.mtl_mass,
            run.path_marginals.map(|p| (p * 1000.0).round() / 1000.0),
            run.claim,
            run.claim_passed
        );
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

fn main() {
    run_example().unwrap();
}
