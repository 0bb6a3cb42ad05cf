//! Gradient-triggered regrowth on a pruned layer. Synapses of unit 0 get a
//! consistently large gradient; they revive after `t_num + 1` epochs in the
//! top `rho_g` percent while the rest of the pruned synapses stay dead.

use sparse_snn::network::{LayerSpec, Network, NetworkSpec, Shape3};
use sparse_snn::pruning::compression_rate;
use sparse_snn::regeneration::{regenerate_step, update_regen_rate, RegenState};
use sparse_snn::{Parameters, StructureMask};

fn main() -> sparse_snn::Result<()> {
    let net = Network::new(NetworkSpec::new(Shape3::new(1, 1, 6), vec![LayerSpec::fc(4), LayerSpec::fc(2)]))?;
    let mut mask = StructureMask::all_alive(&net);
    mask.kill_unit(0, 0);
    mask.kill_unit(0, 1);
    let mut params = Parameters::zeros(&net);
    let mut state = RegenState::new(15.0, 1.1, 2, &mask);
    let start = 0;

    for epoch in 1..=5 {
        let mut grads = Parameters::zeros(&net);
        for (i, g) in grads.layers[0].weights.iter_mut().enumerate() {
            *g = if i < 6 { 0.9 } else { 0.01 };
        }
        let report = regenerate_step(&grads, &mut mask, &mut state, &mut params)?;
        update_regen_rate(&mut state, epoch, start)?;
        println!(
            "epoch {epoch}: threshold {:.3}, hits {}, revived {}, rho_g {:.2}, compression {:.1}%",
            report.threshold,
            report.hits,
            report.total_revived(),
            state.rho_g,
            compression_rate(&mask)
        );
    }
    println!("unit_alive {:?} unit_pruned {:?}", mask.layers[0].unit_alive, mask.layers[0].unit_pruned);
    Ok(())
}
