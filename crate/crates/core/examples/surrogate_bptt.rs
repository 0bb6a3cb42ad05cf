//! One forward/backward pass through a small conv network, followed by a
//! finite-difference check of a single bias gradient.
//!
//! The network's output is piecewise constant in most weights because of
//! the hard threshold, so the finite difference only agrees with BPTT for
//! the readout parameters. Hidden-layer gradients are surrogate values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sparse_snn::engine::{backward_pass, forward_pass, softmax_cross_entropy, InputBatch};
use sparse_snn::network::{LayerSpec, Network, NetworkSpec, Shape3};
use sparse_snn::{Parameters, StructureMask};

fn loss(net: &Network, p: &Parameters, mask: &StructureMask, batch: &InputBatch, labels: &[usize]) -> f64 {
    let (_, z) = forward_pass(net, p, mask, batch).unwrap();
    softmax_cross_entropy(&z, labels).unwrap().0
}

fn main() -> sparse_snn::Result<()> {
    let spec = NetworkSpec::new(
        Shape3::new(1, 6, 6),
        vec![LayerSpec::conv(4, 3), LayerSpec::avg_pool(2), LayerSpec::fc(10), LayerSpec::fc(3)],
    );
    let net = Network::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut params = Parameters::init(&net, &mut rng);
    // Larger than the default init so every hidden layer spikes.
    for l in &mut params.layers {
        l.weights.iter_mut().for_each(|w| *w *= 4.0);
    }
    let mask = StructureMask::all_alive(&net);

    let samples: Vec<Vec<f64>> = (0..4).map(|k| (0..36).map(|i| ((i * (k + 3)) % 7) as f64 / 6.0).collect()).collect();
    let refs: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
    let batch = InputBatch::from_static(&refs, net.spec().time_steps, net.spec().input_shape)?;
    let labels = [0, 1, 2, 1];

    let (states, logits) = forward_pass(&net, &params, &mask, &batch)?;
    let (l, dlogits) = softmax_cross_entropy(&logits, &labels)?;
    let grads = backward_pass(&net, &states, &params, &mask, &dlogits)?;
    println!("loss {l:.6}");
    for (slot, g) in grads.layers.iter().enumerate() {
        let norm: f64 = g.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("layer {slot}: |dW| = {norm:.3e}");
    }

    let out = net.output_slot();
    let h = 1e-6;
    let mut plus = params.clone();
    plus.layers[out].bias[0] += h;
    let mut minus = params.clone();
    minus.layers[out].bias[0] -= h;
    let fd = (loss(&net, &plus, &mask, &batch, &labels) - loss(&net, &minus, &mask, &batch, &labels)) / (2.0 * h);
    println!("readout bias 0: bptt {:.8} finite difference {fd:.8}", grads.layers[out].bias[0]);
    Ok(())
}
