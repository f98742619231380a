// Train every fixed-slot baseline next to the routed model on one dataset
// and print the comparison table.

use adaptive_routing::bench::{Scenario, ScenarioSpec};
use adaptive_routing::diagnostics::ComparisonTable;
use adaptive_routing::experts::Slot;
use adaptive_routing::trainer::{train, train_fixed_baseline, TrainConfig};

pub fn run_example() -> adaptive_routing::Result<()> {
    let spec = ScenarioSpec::sample(Scenario::S2, 1);
    let (train_set, test_set) = spec.generate_split(300, 300)?;
    let config = TrainConfig { epochs: 20, ..TrainConfig::default() };
    let mut metrics = Vec::new();
    for slot in Slot::all() {
        let (_, mut m, _) = train_fixed_baseline(slot.path, slot.paradigm, &config, &train_set, &test_set)?;
        m.label = slot.to_string();
        metrics.push(m);
    }
    metrics.push(train(&config, &train_set, &test_set)?.1);
    let table = ComparisonTable::from_metrics(&metrics)?;
    for row in &table.rows {
        println!("{:<16} {:>8.4} {:>8.4}", row.name, row.rmse_task1, row.rmse_task2);
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
