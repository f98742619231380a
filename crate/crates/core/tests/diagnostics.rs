use std::fs;
use std::path::Path;

use adaptive_routing::bench::{Scenario, ScenarioSpec};
use adaptive_routing::diagnostics::{
    compare_table, quantile, read_run_records, route_report, spearman, weighted_quantile, ComparisonTable, Sankey,
    JOINT_PMF_FILE, MODALITY_ROUTING_FILE,
};
use adaptive_routing::experts::{ModalityPath, Slot, TaskParadigm, NUM_SLOTS};
use adaptive_routing::router::RoutingMode;
use adaptive_routing::trainer::{train, train_fixed_baseline, write_run, Metrics, RunFiles, TrainConfig};
use adaptive_routing::Error;
use proptest::prelude::*;

fn trained_run(dir: &Path) {
    let (train_set, test_set) = ScenarioSpec::sample(Scenario::S3, 1).generate_split(200, 120).unwrap();
    let config = TrainConfig { epochs: 4, ..TrainConfig::default() };
    let (model, metrics, eval) = train(&config, &train_set, &test_set).unwrap();
    write_run(dir, &config, &model, &metrics, &eval).unwrap();
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|row| row.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

/// Lower quantile by sorting: the ⌈q·n⌉-th smallest value.
fn sorted_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((q * v.len() as f64).ceil() as usize).max(1);
    v[k - 1]
}

proptest! {
    #[test]
    fn sankey_conserves_flow(raw in prop::collection::vec(0.0..1.0f64, NUM_SLOTS)) {
        let total: f64 = raw.iter().sum::<f64>().max(1e-9);
        let joint: [f64; NUM_SLOTS] = std::array::from_fn(|k| raw[k] / total);
        let sankey = Sankey::from_joint(&joint);
        for path in ModalityPath::ALL {
            let name = path.to_string();
            prop_assert!((sankey.inflow(&name) - sankey.outflow(&name)).abs() < 1e-12);
            prop_assert!((sankey.inflow(&name) - joint[2 * path.index()] - joint[2 * path.index() + 1]).abs() < 1e-12);
        }
        prop_assert!((sankey.outflow("root") - joint.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn unit_weight_quantiles_match_sorting(v in prop::collection::vec(-100.0..100.0f64, 1..60), q in 0.01..1.0f64) {
        prop_assert_eq!(quantile(&v, q), sorted_quantile(&v, q));
    }

    #[test]
    fn integer_weights_equal_repetition(v in prop::collection::vec((-10.0..10.0f64, 1usize..4), 1..20), q in 0.01..1.0f64) {
        let values: Vec<f64> = v.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
        let repeated: Vec<f64> = v.iter().flat_map(|p| std::iter::repeat_n(p.0, p.1)).collect();
        prop_assert_eq!(weighted_quantile(&values, &weights, q), sorted_quantile(&repeated, q));
    }
}

#[test]
fn spearman_handles_monotone_and_tied_data() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 35.0, 90.0]), Some(1.0));
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
    assert_eq!(spearman(&[1.0], &[1.0]), None);
    // ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
    let r = spearman(&[1.0, 5.0, 5.0, 9.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!((r - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-12, "{r}");
}

#[test]
fn path_marginals_match_modality_routing_means() {
    let dir = tempfile::tempdir().unwrap();
    trained_run(dir.path());
    route_report(dir.path()).unwrap();

    let (_, joint_rows) = read_csv(&dir.path().join(JOINT_PMF_FILE));
    let mut marginal = [0.0; 4];
    for row in &joint_rows {
        let path: ModalityPath = row[0].parse().unwrap();
        marginal[path.index()] += row[2].parse::<f64>().unwrap();
    }
    let (header, rows) = read_csv(&dir.path().join(MODALITY_ROUTING_FILE));
    for path in ModalityPath::ALL {
        let col = header.iter().position(|h| *h == path.to_string()).unwrap();
        let mean = rows.iter().map(|r| r[col].parse::<f64>().unwrap()).sum::<f64>() / rows.len() as f64;
        assert!((mean - marginal[path.index()]).abs() < 1e-9, "{path}: {mean} vs {}", marginal[path.index()]);
    }
    let order_col = header.iter().position(|h| h == "cluster_order").unwrap();
    let mut order: Vec<usize> = rows.iter().map(|r| r[order_col].parse().unwrap()).collect();
    order.sort();
    assert_eq!(order, (0..rows.len()).collect::<Vec<_>>());
}

#[test]
fn route_error_medians_match_a_sort_oracle() {
    let dir = tempfile::tempdir().unwrap();
    trained_run(dir.path());
    let report = route_report(dir.path()).unwrap();
    let rec = read_run_records(dir.path()).unwrap();
    let mut hard_total = 0;
    for summary in report.route_errors.iter().filter(|r| r.mode == RoutingMode::Hard) {
        let errs: Vec<f64> = (0..rec.y.len())
            .filter(|&i| rec.selected[i] == summary.slot)
            .map(|i| 0.5 * ((rec.hard[i][0] - rec.y[i][0]).abs() + (rec.hard[i][1] - rec.y[i][1]).abs()))
            .collect();
        assert_eq!(summary.count, errs.len());
        assert_eq!(summary.q50, sorted_quantile(&errs, 0.5));
        assert_eq!(summary.q25, sorted_quantile(&errs, 0.25));
        assert_eq!(summary.q75, sorted_quantile(&errs, 0.75));
        hard_total += errs.len();
    }
    assert_eq!(hard_total, rec.y.len());
    assert_eq!(report.route_errors.iter().filter(|r| r.mode == RoutingMode::Soft).count(), NUM_SLOTS);
}

#[test]
fn fixed_run_report_is_one_hot() {
    let dir = tempfile::tempdir().unwrap();
    let (train_set, test_set) = ScenarioSpec::sample(Scenario::S1, 2).generate_split(100, 50).unwrap();
    let config = TrainConfig { epochs: 2, ..TrainConfig::default() };
    let slot = Slot::new(ModalityPath::N2, TaskParadigm::Stl);
    let (model, metrics, eval) =
        train_fixed_baseline(slot.path, slot.paradigm, &config, &train_set, &test_set).unwrap();
    let config = TrainConfig { route: metrics.route, ..config };
    write_run(dir.path(), &config, &model, &metrics, &eval).unwrap();
    let report = route_report(dir.path()).unwrap();
    for s in Slot::all() {
        assert_eq!(report.joint_pmf[s.index()], if s == slot { 1.0 } else { 0.0 });
    }
    assert_eq!(report.route_errors.len(), 2);
}

#[test]
fn missing_run_files_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    trained_run(dir.path());
    fs::remove_file(dir.path().join(RunFiles::ROUTING)).unwrap();
    match route_report(dir.path()) {
        Err(e @ Error::Io { .. }) => assert!(e.to_string().contains(RunFiles::ROUTING), "{e}"),
        other => panic!("expected an io error, got {other:?}"),
    }
}

fn metrics(label: &str, block: usize, hash: &str) -> Metrics {
    let dir = tempfile::tempdir().unwrap();
    trained_run(dir.path());
    let mut m = adaptive_routing::trainer::read_metrics(dir.path()).unwrap();
    m.label = label.into();
    m.block = block;
    m.dataset_hash = hash.into();
    m
}

#[test]
fn comparison_rows_follow_block_order() {
    let base = metrics("x", 0, "h");
    let order =
        [(7, "Routing (soft)"), (3, "N2"), (0, "T1"), (6, "HetMTL"), (1, "N1"), (4, "STL"), (2, "T2"), (5, "MTL")];
    let all: Vec<Metrics> =
        order.iter().map(|(b, n)| Metrics { label: n.to_string(), block: *b, ..base.clone() }).collect();
    let table = ComparisonTable::from_metrics(&all).unwrap();
    let names: Vec<&str> = table.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["T1", "N1", "T2", "N2", "STL", "MTL", "HetMTL", "Routing (soft)"]);
    let single = ComparisonTable::from_metrics(&all[..1]).unwrap();
    assert_eq!(single.rows.len(), 1);
}

#[test]
fn comparison_rejects_mixed_datasets() {
    let a = metrics("T1", 0, "aaa");
    let b = Metrics { label: "N1".into(), block: 1, dataset_hash: "bbb".into(), ..a.clone() };
    assert!(matches!(ComparisonTable::from_metrics(&[a, b]), Err(Error::Comparison(_))));
}

#[test]
fn compare_table_reads_metrics_only() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    trained_run(d1.path());
    trained_run(d2.path());
    let table = compare_table(&[d1.path().to_path_buf(), d2.path().to_path_buf()]).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0], table.rows[1]);
    fs::remove_file(d1.path().join(RunFiles::CHECKPOINT)).unwrap();
    assert_eq!(compare_table(&[d1.path().to_path_buf()]).unwrap().rows.len(), 1);
}
