//! Drives a single LIF neuron with a constant current and prints its
//! membrane trace, spikes and surrogate derivative.

use sparse_snn::lif::{lif_step, spike_surrogate_grad};
use sparse_snn::network::{LayerSpec, NetworkSpec, Shape3};

fn main() -> sparse_snn::Result<()> {
    let spec = NetworkSpec::new(Shape3::new(1, 1, 1), vec![LayerSpec::fc(1), LayerSpec::fc(2)]);
    let current = [0.45];
    let (mut u, mut x) = (vec![0.0], vec![0.0]);
    println!("tau={} v_th={} width={}", spec.tau, spec.v_th, spec.surrogate_width);
    println!("t  u       x  du/dx");
    for t in 0..10 {
        (u, x) = lif_step(&u, &x, &current, &spec)?;
        let s = spike_surrogate_grad(&u, &spec);
        println!("{t:<2} {:.4}  {}  {}", u[0], x[0], s[0]);
    }
    Ok(())
}
