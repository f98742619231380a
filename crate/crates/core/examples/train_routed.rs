// Train the soft-routed model on a small Scenario 1 benchmark, save the run
// directory and emit the routing report.

use adaptive_routing::bench::{Scenario, ScenarioSpec};
use adaptive_routing::diagnostics::route_report;
use adaptive_routing::experts::{Slot, TaskParadigm};
use adaptive_routing::trainer::{train, write_run, TrainConfig};

pub fn run_example() -> adaptive_routing::Result<()> {
    let spec = ScenarioSpec::sample(Scenario::S1, 0);
    let (train_set, test_set) = spec.generate_split(400, 400)?;
    let config = TrainConfig { epochs: 30, ..TrainConfig::default() };
    let (model, metrics, eval) = train(&config, &train_set, &test_set)?;
    println!(
        "rmse {:.3} / {:.3} after {} epochs (best {})",
        metrics.rmse_task1, metrics.rmse_task2, metrics.epochs_run, metrics.best_epoch
    );
    println!("MTL mass {:.3}", metrics.mass(TaskParadigm::Mtl));

    let dir = std::env::temp_dir().join(format!("adaptive-routing-run-{}", std::process::id()));
    write_run(&dir, &config, &model, &metrics, &eval)?;
    let report = route_report(&dir)?;
    for s in Slot::all() {
        println!("{s:>7}: {:.3}", report.joint_pmf[s.index()]);
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

fn main() {
    run_example().unwrap();
}
