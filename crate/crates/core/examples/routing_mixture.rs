// Two-stage routing by hand: joint PMF from stage logits, soft mixture,
// expected loss, entropy penalty and Gumbel-Softmax selection.

use adaptive_routing::experts::{ExpertOutput, Slot};
use adaptive_routing::rng::rng_from;
use adaptive_routing::router::{entropy_penalty, expected_loss, gumbel_select, soft_predict, RoutingState};

pub fn run_example() -> adaptive_routing::Result<()> {
    let state = RoutingState::from_logits(&[0.2, 1.5, -0.5, 0.9], &[[0.0, 0.8], [1.0, -1.0], [0.0, 0.0], [-0.3, 0.3]]);
    state.check_simplices()?;
    for slot in Slot::all() {
        println!("{slot:>7}: {:.4}", state.joint[slot.index()]);
    }

    let outputs: [ExpertOutput; 8] =
        std::array::from_fn(|k| ExpertOutput { mean1: k as f64, logvar1: 0.0, mean2: -(k as f64), logvar2: 0.0 });
    let (y1, y2) = soft_predict(&state, &outputs);
    println!("soft prediction ({y1:.3}, {y2:.3})");
    println!("expected loss at targets (3, -3): {:.4}", expected_loss(&state, &outputs, 3.0, -3.0));
    println!("entropy penalty at coefficient 0.01: {:.5}", entropy_penalty(&state, 0.01));

    let mut rng = rng_from(5, &[]);
    let mut counts = [0usize; 8];
    for _ in 0..2000 {
        counts[gumbel_select(&state.joint, 0.5, &mut rng, true).selected.index()] += 1;
    }
    let freq: Vec<String> = counts.iter().map(|c| format!("{:.3}", *c as f64 / 2000.0)).collect();
    println!("Gumbel selection frequencies: {}", freq.join(" "));
    Ok(())
}

fn main() {
    run_example().unwrap();
}
