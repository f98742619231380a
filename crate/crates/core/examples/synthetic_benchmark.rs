// Generate the three synthetic scenarios, write one to disk with its
// sidecar, and replay it from the recorded spec.

use adaptive_routing::bench::{generate_benchmark, read_benchmark, read_sidecar, Scenario, ScenarioSpec};

pub fn run_example() -> adaptive_routing::Result<()> {
    for scenario in [Scenario::S1, Scenario::S2, Scenario::S3] {
        let spec = ScenarioSpec::sample(scenario, 3);
        let (train, _) = spec.generate_split(200, 10)?;
        let (y1, y2) = train.targets();
        let sd = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
        };
        println!("{scenario}: target sd {:.3} / {:.3}", sd(&y1), sd(&y2));
    }

    let dir = std::env::temp_dir().join(format!("adaptive-routing-bench-{}", std::process::id()));
    let spec = ScenarioSpec::sample(Scenario::S1, 0);
    generate_benchmark(&dir, &spec, 100, 50)?;
    let sidecar = read_sidecar(&dir)?;
    let (train, test) = read_benchmark(&dir)?;
    let (replay_train, replay_test) = sidecar.replay()?;
    assert_eq!(train.content_hash(), replay_train.content_hash());
    assert_eq!(test.content_hash(), replay_test.content_hash());
    println!("wrote {} (train hash {})", dir.display(), &sidecar.train_hash[..12]);
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

fn main() {
    run_example().unwrap();
}
