//! Time-unrolled forward pass and backpropagation through time.
//!
//! Hidden conv and fc layers are LIF populations; pooling layers act on the
//! spike maps of each step; the final fc layer is a non-firing integrator
//! whose membrane potential, averaged over the window, gives the logits.
//!
//! Backward recursion for a hidden layer, walking `t` from `T-1` down to 0
//! with `e[t] = dL/dx[t]` arriving from the layer above:
//!
//! ```text
//! dL/dx[t] = e[t] - tau * u[t] * dL/du[t+1]
//! dL/du[t] = dL/dx[t] * s(u[t]) + tau * (1 - x[t]) * dL/du[t+1]
//! ```
//!
//! where `s` is the rectangular surrogate. The second term of `dL/dx[t]` is
//! the path through the reset factor of the next membrane update.

use crate::error::{contract, Result};
use crate::kernels::{fc_backward, fc_forward, ConvGeom, PoolGeom};
use crate::lif::{fire, membrane, surrogate_in};
use crate::mask::StructureMask;
use crate::network::{LayerPlan, LayerSpec, Network, Shape3};
use crate::params::{Gradients, Parameters};

/// Network input for a batch, laid out `[batch][time][c][h][w]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputBatch {
    pub batch: usize,
    pub time_steps: usize,
    pub shape: Shape3,
    pub data: Vec<f64>,
}

impl InputBatch {
    pub fn new(batch: usize, time_steps: usize, shape: Shape3, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * time_steps * shape.len() {
            return Err(contract(format!(
                "input data has {} values, expected {batch}x{time_steps}x{shape}",
                data.len()
            )));
        }
        Ok(Self { batch, time_steps, shape, data })
    }

    /// Repeats each static sample at every time step.
    pub fn from_static(samples: &[&[f64]], time_steps: usize, shape: Shape3) -> Result<Self> {
        let mut data = Vec::with_capacity(samples.len() * time_steps * shape.len());
        for s in samples {
            if s.len() != shape.len() {
                return Err(contract(format!("sample has {} values, expected {shape}", s.len())));
            }
            for _ in 0..time_steps {
                data.extend_from_slice(s);
            }
        }
        Self::new(samples.len(), time_steps, shape, data)
    }

    pub fn step(&self, sample: usize, t: usize) -> &[f64] {
        let n = self.shape.len();
        &self.data[(sample * self.time_steps + t) * n..][..n]
    }
}

/// Recorded activity of one layer over the batch, `[batch][time][unit]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LayerTrace {
    /// Membrane potentials (empty for pooling layers).
    pub u: Vec<f64>,
    /// Spikes for LIF layers, pooled maps for pooling layers, empty for the
    /// readout layer.
    pub x: Vec<f64>,
    /// Flat input index of each max-pool winner.
    pub argmax: Vec<u32>,
    pub size: usize,
}

/// Everything backward needs from a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LifState {
    pub input: InputBatch,
    pub layers: Vec<LayerTrace>,
}

impl LifState {
    pub fn batch(&self) -> usize {
        self.input.batch
    }

    pub fn time_steps(&self) -> usize {
        self.input.time_steps
    }

    /// Output of layer `layer` for one sample and step.
    fn output(&self, layer: usize, sample: usize, t: usize) -> &[f64] {
        let tr = &self.layers[layer];
        &tr.x[(sample * self.time_steps() + t) * tr.size..][..tr.size]
    }

    fn layer_input(&self, layer: usize, sample: usize, t: usize) -> &[f64] {
        if layer == 0 {
            self.input.step(sample, t)
        } else {
            self.output(layer - 1, sample, t)
        }
    }

    /// Spikes of hidden layer `layer` for one sample and step.
    pub fn spikes(&self, layer: usize, sample: usize, t: usize) -> &[f64] {
        self.output(layer, sample, t)
    }

    /// Membrane potentials of layer `layer` for one sample and step.
    pub fn potentials(&self, layer: usize, sample: usize, t: usize) -> &[f64] {
        let tr = &self.layers[layer];
        &tr.u[(sample * self.time_steps() + t) * tr.size..][..tr.size]
    }
}

fn conv_geom(plan: &LayerPlan) -> Option<ConvGeom> {
    match plan.spec {
        LayerSpec::Conv { kernel_size, stride, padding, .. } => Some(ConvGeom {
            input: plan.in_shape,
            output: plan.out_shape,
            kernel: kernel_size,
            stride,
            padding,
        }),
        _ => None,
    }
}

fn pool_geom(plan: &LayerPlan) -> Option<PoolGeom> {
    match plan.spec {
        LayerSpec::AvgPool { window, stride } | LayerSpec::MaxPool { window, stride } => {
            Some(PoolGeom { input: plan.in_shape, output: plan.out_shape, window, stride })
        }
        _ => None,
    }
}

fn check_inputs(net: &Network, params: &Parameters, mask: &StructureMask, batch: &InputBatch) -> Result<()> {
    params.check_layout(net)?;
    mask.check_layout(net)?;
    if batch.shape != net.spec().input_shape {
        return Err(contract(format!(
            "input shape {} does not match network input {}",
            batch.shape,
            net.spec().input_shape
        )));
    }
    if batch.time_steps != net.spec().time_steps {
        return Err(contract(format!(
            "input has {} time steps, network simulates {}",
            batch.time_steps,
            net.spec().time_steps
        )));
    }
    Ok(())
}

/// Runs the network over a batch. Masked synapses contribute nothing and
/// units marked dead have no bias, so a unit with every incoming synapse
/// dead never spikes. Logits are the readout potential averaged over time.
pub fn forward_pass(
    net: &Network,
    params: &Parameters,
    mask: &StructureMask,
    batch: &InputBatch,
) -> Result<(LifState, Vec<Vec<f64>>)> {
    check_inputs(net, params, mask, batch)?;
    let eff = params.masked(mask);
    let spec = net.spec();
    let (tsteps, tau, v_th) = (spec.time_steps, spec.tau, spec.v_th);
    let output_layer = net.plans().len() - 1;

    let mut layers: Vec<LayerTrace> = net
        .plans()
        .iter()
        .enumerate()
        .map(|(l, plan)| {
            let size = plan.out_shape.len();
            let n = batch.batch * tsteps * size;
            let (u, x) = match plan.spec {
                LayerSpec::AvgPool { .. } | LayerSpec::MaxPool { .. } => (Vec::new(), vec![0.0; n]),
                _ if l == output_layer => (vec![0.0; n], Vec::new()),
                _ => (vec![0.0; n], vec![0.0; n]),
            };
            let argmax = if matches!(plan.spec, LayerSpec::MaxPool { .. }) { vec![0; n] } else { Vec::new() };
            LayerTrace { u, x, argmax, size }
        })
        .collect();

    let mut current = Vec::new();
    let mut padded = Vec::new();
    let mut nz = Vec::new();
    for (l, plan) in net.plans().iter().enumerate() {
        let size = plan.out_shape.len();
        let in_size = plan.in_shape.len();
        let (before, rest) = layers.split_at_mut(l);
        let trace = &mut rest[0];
        for s in 0..batch.batch {
            for t in 0..tsteps {
                let input: &[f64] = if l == 0 {
                    batch.step(s, t)
                } else {
                    let prev = &before[l - 1];
                    &prev.x[(s * tsteps + t) * in_size..][..in_size]
                };
                let at = (s * tsteps + t) * size;
                match plan.spec {
                    LayerSpec::AvgPool { .. } | LayerSpec::MaxPool { .. } => {
                        if let Some(bad) = input.iter().find(|&&v| v != 0.0 && v != 1.0) {
                            return Err(contract(format!(
                                "pooling layer {l} received non-binary input {bad}"
                            )));
                        }
                        let geom = pool_geom(plan).expect("pool plan");
                        let out = &mut trace.x[at..at + size];
                        if matches!(plan.spec, LayerSpec::AvgPool { .. }) {
                            geom.avg_forward(input, out);
                        } else {
                            geom.max_forward(input, out, &mut trace.argmax[at..at + size]);
                        }
                    }
                    LayerSpec::Conv { .. } | LayerSpec::Fc { .. } => {
                        let p = &eff.layers[plan.slot.expect("weighted plan")];
                        current.resize(size, 0.0);
                        if let Some(geom) = conv_geom(plan) {
                            padded.resize(geom.padded_len(), 0.0);
                            geom.pad_into(input, &mut padded);
                            geom.forward(&padded, &p.weights, &p.bias, &mut current);
                        } else {
                            fc_forward(input, &p.weights, &p.bias, &mut current, &mut nz);
                        }
                        let readout = l == output_layer;
                        for i in 0..size {
                            let (u_prev, x_prev) = if t == 0 {
                                (0.0, 0.0)
                            } else {
                                let pi = at - size + i;
                                (trace.u[pi], if readout { 0.0 } else { trace.x[pi] })
                            };
                            let u = membrane(tau, u_prev, x_prev, current[i]);
                            trace.u[at + i] = u;
                            if !readout {
                                trace.x[at + i] = fire(u, v_th);
                            }
                        }
                    }
                }
            }
        }
    }

    let classes = net.class_count();
    let out = &layers[output_layer];
    let logits = (0..batch.batch)
        .map(|s| {
            let mut acc = vec![0.0; classes];
            for t in 0..tsteps {
                let u = &out.u[(s * tsteps + t) * classes..][..classes];
                for (a, v) in acc.iter_mut().zip(u) {
                    *a += v;
                }
            }
            acc.iter().map(|v| v / tsteps as f64).collect()
        })
        .collect();
    Ok((LifState { input: batch.clone(), layers }, logits))
}

/// BPTT through a recorded forward pass. `loss_grad[s]` is `dL/dlogits` for
/// sample `s`. Gradients are produced for every synapse, masked or not; a
/// masked synapse is treated as having effective weight zero.
pub fn backward_pass(
    net: &Network,
    states: &LifState,
    params: &Parameters,
    mask: &StructureMask,
    loss_grad: &[Vec<f64>],
) -> Result<Gradients> {
    check_inputs(net, params, mask, &states.input)?;
    if states.layers.len() != net.plans().len()
        || states.layers.iter().zip(net.plans()).any(|(tr, p)| tr.size != p.out_shape.len())
    {
        return Err(contract("forward states do not match the network"));
    }
    let classes = net.class_count();
    if loss_grad.len() != states.batch() || loss_grad.iter().any(|g| g.len() != classes) {
        return Err(contract(format!(
            "loss gradient must be {} x {classes}",
            states.batch()
        )));
    }
    let eff = params.masked(mask);
    let spec = net.spec();
    let (tsteps, tau, v_th, width) = (spec.time_steps, spec.tau, spec.v_th, spec.surrogate_width);
    let window = spec.surrogate_window;
    let plans = net.plans();
    let output_layer = plans.len() - 1;
    let mut grads = Parameters::zeros(net);

    // dL/d(output of the current layer), [time][size].
    let mut grad_out: Vec<f64> = Vec::new();
    let mut grad_in: Vec<f64> = Vec::new();
    let mut grad_u: Vec<f64> = Vec::new();
    let mut padded = Vec::new();
    let mut grad_padded = Vec::new();
    let mut nz = Vec::new();

    for s in 0..states.batch() {
        for l in (0..plans.len()).rev() {
            let plan = &plans[l];
            let size = plan.out_shape.len();
            let in_size = plan.in_shape.len();
            let need_input_grad = l > 0;
            grad_in.clear();
            grad_in.resize(tsteps * in_size, 0.0);

            match plan.spec {
                LayerSpec::AvgPool { .. } | LayerSpec::MaxPool { .. } => {
                    let geom = pool_geom(plan).expect("pool plan");
                    for t in 0..tsteps {
                        let go = &grad_out[t * size..(t + 1) * size];
                        let gi = &mut grad_in[t * in_size..(t + 1) * in_size];
                        if matches!(plan.spec, LayerSpec::AvgPool { .. }) {
                            geom.avg_backward(go, gi);
                        } else {
                            let at = (s * tsteps + t) * size;
                            PoolGeom::max_backward(go, &states.layers[l].argmax[at..at + size], gi);
                        }
                    }
                }
                LayerSpec::Conv { .. } | LayerSpec::Fc { .. } => {
                    let slot = plan.slot.expect("weighted plan");
                    grad_u.clear();
                    grad_u.resize(tsteps * size, 0.0);
                    let trace = &states.layers[l];
                    if l == output_layer {
                        let g = &loss_grad[s];
                        for t in (0..tsteps).rev() {
                            for i in 0..size {
                                let carry = if t + 1 < tsteps { tau * grad_u[(t + 1) * size + i] } else { 0.0 };
                                grad_u[t * size + i] = g[i] / tsteps as f64 + carry;
                            }
                        }
                    } else {
                        for t in (0..tsteps).rev() {
                            let at = (s * tsteps + t) * size;
                            for i in 0..size {
                                let u = trace.u[at + i];
                                let x = trace.x[at + i];
                                let mut dx = grad_out[t * size + i];
                                let mut du = 0.0;
                                if t + 1 < tsteps {
                                    let next = grad_u[(t + 1) * size + i];
                                    dx -= tau * u * next;
                                    du = tau * (1.0 - x) * next;
                                }
                                grad_u[t * size + i] = dx * surrogate_in(window, u, v_th, width) + du;
                            }
                        }
                    }

                    let g = &mut grads.layers[slot];
                    let w = &eff.layers[slot].weights;
                    match conv_geom(plan) {
                        Some(geom) => {
                            padded.resize(geom.padded_len(), 0.0);
                            for t in 0..tsteps {
                                geom.pad_into(states.layer_input(l, s, t), &mut padded);
                                let gp = if need_input_grad {
                                    grad_padded.clear();
                                    grad_padded.resize(geom.padded_len(), 0.0);
                                    Some(grad_padded.as_mut_slice())
                                } else {
                                    None
                                };
                                geom.backward(
                                    &padded,
                                    &grad_u[t * size..(t + 1) * size],
                                    w,
                                    &mut g.weights,
                                    &mut g.bias,
                                    gp,
                                );
                                if need_input_grad {
                                    geom.unpad_add(&grad_padded, &mut grad_in[t * in_size..(t + 1) * in_size]);
                                }
                            }
                        }
                        None => {
                            for t in 0..tsteps {
                                let gi = need_input_grad.then(|| &mut grad_in[t * in_size..(t + 1) * in_size]);
                                fc_backward(
                                    states.layer_input(l, s, t),
                                    &grad_u[t * size..(t + 1) * size],
                                    w,
                                    &mut g.weights,
                                    &mut g.bias,
                                    gi,
                                    &mut nz,
                                );
                            }
                        }
                    }
                }
            }
            std::mem::swap(&mut grad_out, &mut grad_in);
        }
    }
    Ok(grads)
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the
/// logits.
pub fn softmax_cross_entropy(logits: &[Vec<f64>], labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
    if logits.len() != labels.len() {
        return Err(contract("logits and labels differ in batch size"));
    }
    let n = logits.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for (z, &y) in logits.iter().zip(labels) {
        if y >= z.len() {
            return Err(contract(format!("label {y} out of range for {} classes", z.len())));
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        loss += sum.ln() + max - z[y];
        grads.push(
            exps.iter()
                .enumerate()
                .map(|(k, e)| (e / sum - if k == y { 1.0 } else { 0.0 }) / n)
                .collect(),
        );
    }
    Ok((loss / n, grads))
}

/// Index of the largest logit; the lowest index wins ties.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = k;
        }
    }
    best
}
