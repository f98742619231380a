//! Command-line front end: benchmark generation, tabular synthesis,
//! training, baselines, reports, comparison tables and the scenario suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_routing::bench::{generate_benchmark, read_benchmark, Scenario, ScenarioSpec};
use adaptive_routing::diagnostics::{compare_table, route_report, scenario_suite, SuiteOptions};
use adaptive_routing::experts::{ModalityPath, Slot, TaskParadigm};
use adaptive_routing::router::RoutingMode;
use adaptive_routing::tabular::{demo_schema, demo_table, fidelity_report, SynthesisMethod, Table, TabularSchema};
use adaptive_routing::trainer::{train, write_run, RouteSpec, TrainConfig};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adaptive-routing", version, about = "Adaptive modality/task routing experiments")]
struct Cli {
    /// Base seed; overrides the config file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Evaluation worker threads; training stays single-threaded.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Training config (JSON); missing keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario benchmark (train.csv, test.csv, spec.json).
    Gen {
        #[arg(long, default_value = "s1")]
        scenario: Scenario,
        #[arg(long, default_value_t = 1000)]
        n_train: usize,
        #[arg(long, default_value_t = 1000)]
        n_test: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a table and write a fidelity report.
    Tabsynth {
        #[arg(long)]
        method: SynthesisMethod,
        /// Source CSV; the bundled demo table when omitted.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Schema JSON; required with --in.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train the routed model on a benchmark directory.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Overrides router.mode.
        #[arg(long)]
        mode: Option<RoutingMode>,
        /// Replace the router by a one-hot on this slot (e.g. T2-MTL).
        #[arg(long)]
        frozen: Option<Slot>,
    },
    /// Train a single fixed-slot baseline.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        path: ModalityPath,
        #[arg(long)]
        paradigm: TaskParadigm,
        /// Freeze log-variances at 0 (squared-error ablation).
        #[arg(long)]
        homoscedastic: bool,
    },
    /// Write routing reports into a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// Build a comparison table from run directories.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train routed models on S1/S2/S3 and check the directional claims.
    Suite {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(cli: &Cli) -> Result<TrainConfig> {
    let mut config = match &cli.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    config.validate()?;
    Ok(config)
}

fn run_training(config: &TrainConfig, args: &RunArgs) -> Result<()> {
    let (train_set, test_set) =
        read_benchmark(&args.data).with_context(|| format!("reading benchmark {}", args.data.display()))?;
    let (model, metrics, eval) = train(config, &train_set, &test_set)?;
    write_run(&args.out, config, &model, &metrics, &eval)?;
    println!(
        "{}: rmse {:.4} / {:.4} (hard {:.4} / {:.4}), {} epochs, best {}",
        metrics.label,
        metrics.rmse_task1,
        metrics.rmse_task2,
        metrics.hard_rmse_task1,
        metrics.hard_rmse_task2,
        metrics.epochs_run,
        metrics.best_epoch
    );
    Ok(())
}

fn tabsynth(
    method: SynthesisMethod,
    input: Option<&Path>,
    schema: Option<&Path>,
    n: usize,
    seed: u64,
    out: &Path,
    report: Option<&Path>,
) -> Result<()> {
    let (source, schema) = match (input, schema) {
        (Some(i), Some(s)) => (Table::read_csv(i)?, TabularSchema::load(s)?),
        (Some(_), None) => bail!("--schema is required with --in"),
        (None, Some(s)) => (demo_table(), TabularSchema::load(s)?),
        (None, None) => (demo_table(), demo_schema()),
    };
    let synthetic = method.synthesize(&source, &schema, n, seed)?;
    synthetic.write_csv(out)?;
    let fidelity = fidelity_report(&source, &synthetic, &schema)?;
    println!("{method}: correlation MAD {:.4}, class KL {:.4}", fidelity.correlation_mad, fidelity.class_kl);
    if let Some(path) = report {
        fidelity.save(path)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Gen { scenario, n_train, n_test, out } => {
            let spec = ScenarioSpec::sample(*scenario, seed);
            let sidecar = generate_benchmark(out, &spec, *n_train, *n_test)?;
            println!("{scenario}: train {} test {} -> {}", sidecar.train_hash, sidecar.test_hash, out.display());
        }
        Command::Tabsynth { method, input, schema, n, out, report } => {
            tabsynth(*method, input.as_deref(), schema.as_deref(), *n, seed, out, report.as_deref())?;
        }
        Command::Train { run, mode, frozen } => {
            let mut config = load_config(cli)?;
            if let Some(mode) = mode {
                config.router.mode = *mode;
            }
            if let Some(slot) = frozen {
                config.route = RouteSpec::Frozen(*slot);
            }
            run_training(&config, run)?;
        }
        Command::Baseline { run, path, paradigm, homoscedastic } => {
            let mut config = load_config(cli)?;
            config.route = RouteSpec::Fixed(Slot::new(*path, *paradigm));
            config.model.homoscedastic |= *homoscedastic;
            run_training(&config, run)?;
        }
        Command::Report { run } => {
            let report = route_report(run)?;
            let pmf: Vec<String> =
                Slot::all().iter().map(|s| format!("{s} {:.3}", report.joint_pmf[s.index()])).collect();
            println!("joint PMF: {}", pmf.join(", "));
        }
        Command::Compare { runs, out } => {
            let table = compare_table(runs)?;
            for row in &table.rows {
                println!("{:<16} {:>10.4} {:>10.4}", row.name, row.rmse_task1, row.rmse_task2);
            }
            if let Some(path) = out {
                table.write_csv(path)?;
            }
        }
        Command::Suite { out, seeds } => {
            let options = SuiteOptions { seeds: *seeds, config: load_config(cli)?, ..SuiteOptions::default() };
            let report = scenario_suite(seed, out, &options)?;
            for v in &report.scenarios {
                println!(
                    "{} {}: {} ({}/{} runs), probability-error alignment {}",
                    if v.passed && v.alignment_passed { "PASS" } else { "FAIL" },
                    v.scenario,
                    v.claim,
                    v.runs_passed,
                    v.runs,
                    if v.alignment_passed { "ok" } else { "violated" }
                );
            }
            if !report.all_passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
