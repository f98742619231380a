use adaptive_routing::ad::Tape;
use adaptive_routing::bench::{Dataset, Sample, Scenario, ScenarioSpec, Split};
use adaptive_routing::experts::{ExpertConfig, ModalityPath, Slot, TaskParadigm};
use adaptive_routing::rng::rng_from;
use adaptive_routing::trainer::{
    evaluate, load_model, read_metrics, train, train_fixed_baseline, write_run, Model, RouteSpec, RunFiles,
    TrainConfig, WeightMode,
};
use adaptive_routing::Error;
use rand::Rng as _;

fn s1(n_train: usize, n_test: usize) -> (Dataset, Dataset) {
    ScenarioSpec::sample(Scenario::S1, 0).generate_split(n_train, n_test).unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, ..TrainConfig::default() }
}

#[test]
fn constant_targets_are_learned() {
    let mut rng = rng_from(1, &[]);
    let mut make = |n: usize, split| {
        let samples = (0..n)
            .map(|_| Sample {
                x_num: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                x_text: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                y1: 3.0,
                y2: -2.0,
            })
            .collect();
        Dataset::new(samples, split).unwrap()
    };
    let (train_set, test_set) = (make(300, Split::Train), make(100, Split::Test));
    let config = TrainConfig { epochs: 50, patience: 0, ..TrainConfig::default() };
    let (_, m, _) = train(&config, &train_set, &test_set).unwrap();
    assert_eq!(m.epochs_run, 50);
    assert!(m.rmse_task1 < 0.05 && m.rmse_task2 < 0.05, "{} {}", m.rmse_task1, m.rmse_task2);
}

#[test]
fn training_is_deterministic_per_seed() {
    let (train_set, test_set) = s1(200, 100);
    let config = quick(6);
    let (_, a, _) = train(&config, &train_set, &test_set).unwrap();
    let (_, b, _) = train(&config, &train_set, &test_set).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let (_, c, _) = train(&TrainConfig { seed: 1, ..config }, &train_set, &test_set).unwrap();
    assert_ne!(a.step_losses, c.step_losses);
}

#[test]
fn threaded_evaluation_matches_single_threaded() {
    let (train_set, test_set) = s1(200, 300);
    let (model, _, eval) = train(&quick(3), &train_set, &test_set).unwrap();
    let threaded = evaluate(&model, &test_set, 3).unwrap();
    assert_eq!(eval, threaded);
}

#[test]
fn rmse_recomputes_from_predictions_csv() {
    let (train_set, test_set) = s1(200, 150);
    let config = quick(5);
    let (model, metrics, eval) = train(&config, &train_set, &test_set).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), &config, &model, &metrics, &eval).unwrap();

    let mut reader = csv::Reader::from_path(dir.path().join(RunFiles::PREDICTIONS)).unwrap();
    let header = reader.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (y1, y2, p1, p2) = (col("y1"), col("y2"), col("soft_y1"), col("soft_y2"));
    let (mut s1, mut s2, mut n) = (0.0, 0.0, 0.0);
    for row in reader.records() {
        let row = row.unwrap();
        let v = |i: usize| row[i].parse::<f64>().unwrap();
        s1 += (v(y1) - v(p1)).powi(2);
        s2 += (v(y2) - v(p2)).powi(2);
        n += 1.0;
    }
    assert!(((s1 / n).sqrt() - metrics.rmse_task1).abs() < 1e-10);
    assert!(((s2 / n).sqrt() - metrics.rmse_task2).abs() < 1e-10);
    assert_eq!(read_metrics(dir.path()).unwrap(), metrics);
}

#[test]
fn saved_runs_reload_to_the_same_predictions() {
    let (train_set, test_set) = s1(200, 80);
    let config = quick(4);
    let (model, metrics, eval) = train(&config, &train_set, &test_set).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), &config, &model, &metrics, &eval).unwrap();
    let reloaded = load_model(dir.path()).unwrap();
    assert_eq!(evaluate(&reloaded, &test_set, 1).unwrap(), eval);
}

#[test]
fn numeric_only_path_wins_task1_on_s2() {
    // task 1 in S2 depends on the numeric modality alone
    let spec = ScenarioSpec::sample(Scenario::S2, 0);
    let (train_set, test_set) = spec.generate_split(500, 300).unwrap();
    let config = quick(40);
    let (_, n1, _) = train_fixed_baseline(ModalityPath::N1, TaskParadigm::Stl, &config, &train_set, &test_set).unwrap();
    let (_, t1, _) = train_fixed_baseline(ModalityPath::T1, TaskParadigm::Stl, &config, &train_set, &test_set).unwrap();
    assert!(n1.rmse_task1 < t1.rmse_task1, "N1 {} vs T1 {}", n1.rmse_task1, t1.rmse_task1);
}

#[test]
fn homoscedastic_loss_is_half_squared_error() {
    let (data, _) = s1(12, 1);
    let idx: Vec<usize> = (0..12).collect();
    let config = TrainConfig {
        route: RouteSpec::Fixed(Slot::new(ModalityPath::T2, TaskParadigm::Mtl)),
        model: ExpertConfig { homoscedastic: true, ..ExpertConfig::default() },
        ..TrainConfig::default()
    };
    let mut model = Model::new(&config, data.d_num(), data.d_text()).unwrap();
    let mut rng = rng_from(2, &[]);
    for id in model.store.ids().collect::<Vec<_>>() {
        for v in model.store.get_mut(id).values_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
    }
    let mut tape = Tape::new();
    let fwd = model.forward_batch(&mut tape, &data, &idx, WeightMode::Soft).unwrap();
    let means = fwd.soft_means(&tape);
    let losses = tape.value(fwd.sample_loss).values().to_vec();
    for (k, &i) in idx.iter().enumerate() {
        let s = &data.samples()[i];
        let want = 0.5 * ((s.y1 - means[k][0]).powi(2) + (s.y2 - means[k][1]).powi(2));
        assert!((losses[k] - want).abs() < 1e-12, "{} vs {want}", losses[k]);
    }
}

#[test]
fn soft_routing_reaches_every_parameter() {
    let (data, _) = s1(16, 1);
    let idx: Vec<usize> = (0..16).collect();
    let mut model = Model::new(&TrainConfig::default(), data.d_num(), data.d_text()).unwrap();
    // zero output layers would block the layers beneath them
    let mut rng = rng_from(5, &[]);
    for id in model.store.ids().collect::<Vec<_>>() {
        for v in model.store.get_mut(id).values_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let mut tape = Tape::new();
    let fwd = model.forward_batch(&mut tape, &data, &idx, WeightMode::Soft).unwrap();
    let loss = tape.mean(fwd.sample_loss);
    let grads = tape.backward(loss, &model.store).unwrap();
    for id in model.router_param_ids().into_iter().chain(model.expert_param_ids()) {
        assert!(grads.param(id).values().iter().any(|g| *g != 0.0), "{} has no gradient", model.store.name(id));
    }
}

#[test]
fn zero_width_layers_are_rejected() {
    let config = TrainConfig { model: ExpertConfig { hidden_dims: vec![0], ..ExpertConfig::default() }, ..quick(1) };
    assert!(matches!(Model::new(&config, 4, 4), Err(Error::Config(_))));
}

#[test]
fn divergence_reports_the_epoch() {
    let (train_set, test_set) = s1(100, 20);
    let config = TrainConfig { learning_rate: 1e300, grad_clip: 0.0, ..quick(5) };
    match train(&config, &train_set, &test_set) {
        Err(Error::Train { epoch, .. }) => assert!(epoch < 5),
        other => panic!("expected a training error, got {:?}", other.map(|r| r.1.rmse())),
    }
}

#[test]
fn mismatched_dims_are_a_shape_error() {
    let (train_set, _) = s1(20, 1);
    let other = ScenarioSpec::sample_with(
        Scenario::S1,
        adaptive_routing::bench::ScenarioDims { d_num: 5, ..Default::default() },
        0,
    );
    let (test_set, _) = other.generate_split(10, 1).unwrap();
    let (model, _, _) = train(&quick(1), &train_set, &train_set).unwrap();
    assert!(matches!(evaluate(&model, &test_set, 1), Err(Error::Shape(_))));
}
