// Synthesize 200 rows from the bundled demo table with each generator and
// print the fidelity report.

use adaptive_routing::tabular::{demo_schema, demo_table, fidelity_report, SynthesisMethod};

pub fn run_example() -> adaptive_routing::Result<()> {
    let source = demo_table();
    let schema = demo_schema();
    println!("source: {} rows x {} columns, outcomes {:?}", source.n_rows(), source.n_cols(), schema.outcomes);
    for method in SynthesisMethod::ALL {
        let synthetic = method.synthesize(&source, &schema, 200, 0)?;
        let report = fidelity_report(&source, &synthetic, &schema)?;
        let worst = report.marginals.iter().max_by(|a, b| a.ks.total_cmp(&b.ks)).expect("columns");
        println!(
            "{method:>8}: correlation MAD {:.4}  class KL {:.4}  worst marginal {} (KS {:.3})",
            report.correlation_mad, report.class_kl, worst.column, worst.ks
        );
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
