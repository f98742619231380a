// Build all eight expert slots, push one batch through every modality path
// and score the outputs with the heteroscedastic loss.

use adaptive_routing::ad::{ParamStore, Tape};
use adaptive_routing::bench::{Scenario, ScenarioSpec};
use adaptive_routing::experts::{paradigm_loss_graph, ExpertBank, ExpertConfig, ModalityTransforms, Slot};

pub fn run_example() -> adaptive_routing::Result<()> {
    let spec = ScenarioSpec::sample(Scenario::S1, 0);
    let (data, _) = spec.generate_split(16, 1)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let (x_num, x_text) = (data.x_num(&idx), data.x_text(&idx));

    let transforms = ModalityTransforms::sample(data.d_num(), data.d_text(), 0);
    let mut store = ParamStore::new();
    let bank = ExpertBank::full(&mut store, &transforms, &ExpertConfig::default(), 0)?;
    println!("{} parameters across {} slots", store.numel(), bank.slots().count());

    let (y1, y2) = data.targets();
    let mut tape = Tape::new();
    let y1 = tape.constant(adaptive_routing::ad::Tensor::matrix(y1.len(), 1, y1)?)?;
    let y2 = tape.constant(adaptive_routing::ad::Tensor::matrix(y2.len(), 1, y2)?)?;
    // Output heads start at zero, so every slot opens on the same loss:
    // half the summed squared targets.
    for slot in Slot::all() {
        let x = tape.constant(transforms.apply(slot.path, &x_num, &x_text)?)?;
        let out = bank.forward(&mut tape, &store, slot, x)?;
        let loss = paradigm_loss_graph(&mut tape, out, y1, y2)?;
        let mean = tape.mean(loss);
        println!(
            "{slot:>7}: input width {:>2}, mean loss at init {:.4}",
            transforms.input_dim(slot.path),
            tape.value(mean).item()
        );
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
