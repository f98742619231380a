// Record a small expression on the tape, backpropagate, and confirm the
// gradients against central finite differences.

use adaptive_routing::ad::{grad_check, Activation, Mlp, ParamStore, Tape, Tensor};
use adaptive_routing::rng::rng_from;

pub fn run_example() -> adaptive_routing::Result<()> {
    let mut store = ParamStore::new();
    let mut rng = rng_from(11, &[]);
    let mlp = Mlp::new(&mut store, "demo", &[3, 8, 2], Activation::Tanh, false, &mut rng)?;
    let x = Tensor::from_rows(&[vec![0.5, -1.0, 2.0], vec![0.0, 0.3, -0.7]])?;

    let mut tape = Tape::new();
    let input = tape.constant(x.clone())?;
    let out = mlp.forward(&mut tape, &store, input)?;
    let probs = tape.softmax(out);
    let sq = tape.square(probs);
    let loss = tape.sum(sq);
    let grads = tape.backward(loss, &store)?;
    println!("loss {:.6}, gradient norm {:.6}", tape.value(loss).item(), grads.global_norm());

    let report = grad_check(
        |tape, store| {
            let input = tape.constant(x.clone())?;
            let out = mlp.forward(tape, store, input)?;
            let probs = tape.softmax(out);
            let sq = tape.square(probs);
            Ok(tape.sum(sq))
        },
        &mut store,
        &[],
        1e-5,
        1e-4,
    )?;
    println!("checked {} entries, max relative error {:.2e}", report.checked, report.max_relative_error);
    assert!(report.passed());
    Ok(())
}

fn main() {
    run_example().unwrap();
}
