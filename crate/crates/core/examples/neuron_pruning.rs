//! Importance scores and one pruning pass on a small fc network whose
//! boundaries were set by hand, then the adaptive rate schedule over a few
//! epochs.

use sparse_snn::constraint::{init_boundaries, SynapseCell};
use sparse_snn::network::{LayerSpec, Network, NetworkSpec, Shape3};
use sparse_snn::pruning::{
    compression_rate, delta_schedule, neuron_importance, prune_step, update_prune_rates, PruneSchedule,
};
use sparse_snn::{Parameters, StructureMask};

fn main() -> sparse_snn::Result<()> {
    let net = Network::new(NetworkSpec::new(Shape3::new(1, 1, 8), vec![LayerSpec::fc(10), LayerSpec::fc(2)]))?;
    let mut bounds = init_boundaries(&Parameters::zeros(&net));
    // Unit u gets boundaries of width proportional to (u % 5) + 1.
    for (i, cell) in bounds.layers[0].iter_mut().enumerate() {
        *cell = SynapseCell::with_bound(0.1 * ((i / 8) % 5 + 1) as f64);
    }
    let mut mask = StructureMask::all_alive(&net);
    let importance: Vec<Vec<f64>> = (0..2).map(|s| neuron_importance(&bounds, &mask, s)).collect();
    println!("D = {:?}", importance[0].iter().map(|d| format!("{d:.1}")).collect::<Vec<_>>());

    let mut sched = PruneSchedule { rho_fc: 30.0, start_epoch: 4, mid_epoch: 7, ..PruneSchedule::default() };
    let report = prune_step(&net, &importance, &mut mask, &sched)?;
    println!("killed {:?}, alive {:?}, compression {:.1}%", report.killed, mask.alive_counts(), compression_rate(&mask));

    println!("epoch delta     rho_fc");
    for epoch in 5..=10 {
        let delta = delta_schedule(epoch, &sched)?;
        update_prune_rates(&mut sched, &net, epoch, &mask.retained_counts())?;
        println!("{epoch:<5} {delta:<9.5} {:.3}", sched.rho_fc);
    }
    Ok(())
}
