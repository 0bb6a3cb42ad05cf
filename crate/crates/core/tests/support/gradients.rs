//! Vectorized BPTT against an independent scalar reference.
//!
//! The reference re-implements the LIF network with plain nested loops and
//! differentiates it in forward mode: every effective parameter gets its own
//! tangent pass in which a spike's tangent is `s(u) * du`. By linearity of the
//! chain rule this yields the same surrogate gradient that reverse-mode BPTT
//! computes, along a completely different code path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_snn::engine::{backward_pass, forward_pass, softmax_cross_entropy, InputBatch};
use sparse_snn::network::{LayerSpec, Network, NetworkSpec, Shape3, SurrogateWindow};
use sparse_snn::{Parameters, StructureMask};

pub const REL_TOL: f64 = 1e-10;
pub const ABS_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug)]
struct D {
    v: f64,
    d: f64,
}

impl D {
    fn c(v: f64) -> Self {
        D { v, d: 0.0 }
    }
    fn add(self, o: D) -> D {
        D { v: self.v + o.v, d: self.d + o.d }
    }
    fn mul(self, o: D) -> D {
        D { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
    fn scale(self, k: f64) -> D {
        D { v: self.v * k, d: self.d * k }
    }
}

struct Lif {
    tau: f64,
    v_th: f64,
    a: f64,
    closed: bool,
}

impl Lif {
    fn s(&self, u: f64) -> f64 {
        let d = (u - self.v_th).abs();
        let inside = if self.closed { d <= self.a / 2.0 } else { d < self.a / 2.0 };
        if inside {
            1.0 / self.a
        } else {
            0.0
        }
    }
}

/// Effective weights and biases, one flat list per weighted layer.
struct Eff {
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

/// Scalar forward pass over one sample. `seed = (slot, is_weight, index)`
/// marks the parameter whose tangent is 1. Returns the spike maps of every
/// non-readout layer as `[layer][t][i]` and the logits.
fn reference(
    spec: &NetworkSpec,
    eff: &Eff,
    input: &[Vec<f64>],
    seed: Option<(usize, bool, usize)>,
) -> (Vec<Vec<Vec<f64>>>, Vec<D>) {
    let lif = Lif {
        tau: spec.tau,
        v_th: spec.v_th,
        a: spec.surrogate_width,
        closed: spec.surrogate_window == SurrogateWindow::Closed,
    };
    let tsteps = spec.time_steps;
    let weighted = spec.layers.iter().filter(|l| l.is_weighted()).count();
    let p = |slot: usize, is_w: bool, i: usize| -> D {
        let v = if is_w { eff.w[slot][i] } else { eff.b[slot][i] };
        let d = if seed == Some((slot, is_w, i)) { 1.0 } else { 0.0 };
        D { v, d }
    };

    // Activations entering the current layer, per time step, as duals.
    let mut shape = spec.input_shape;
    let mut act: Vec<Vec<D>> = input.iter().map(|f| f.iter().map(|&v| D::c(v)).collect()).collect();
    let mut spikes = Vec::new();
    let mut slot = 0;
    let mut logits = Vec::new();
    for layer in &spec.layers {
        let (c, h, w) = (shape.channels, shape.height, shape.width);
        match *layer {
            LayerSpec::AvgPool { window, stride } | LayerSpec::MaxPool { window, stride } => {
                let is_max = matches!(layer, LayerSpec::MaxPool { .. });
                let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
                act = act
                    .iter()
                    .map(|frame| {
                        let mut out = Vec::new();
                        for ch in 0..c {
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    let mut best: Option<D> = None;
                                    let mut sum = D::c(0.0);
                                    for dy in 0..window {
                                        for dx in 0..window {
                                            let v = frame[(ch * h + oy * stride + dy) * w + ox * stride + dx];
                                            sum = sum.add(v);
                                            if best.map_or(true, |b| v.v > b.v) {
                                                best = Some(v);
                                            }
                                        }
                                    }
                                    out.push(if is_max { best.unwrap() } else { sum.scale(1.0 / (window * window) as f64) });
                                }
                            }
                        }
                        out
                    })
                    .collect();
                shape = Shape3::new(c, oh, ow);
                spikes.push(act.iter().map(|f| f.iter().map(|d| d.v).collect()).collect());
            }
            LayerSpec::Conv { .. } | LayerSpec::Fc { .. } => {
                // Input current per time step.
                let (out_shape, current): (Shape3, Vec<Vec<D>>) = match *layer {
                    LayerSpec::Conv { out_channels, kernel_size: k, stride, padding } => {
                        let oh = (h + 2 * padding - k) / stride + 1;
                        let ow = (w + 2 * padding - k) / stride + 1;
                        let cur = act
                            .iter()
                            .map(|frame| {
                                let mut out = Vec::new();
                                for oc in 0..out_channels {
                                    for oy in 0..oh {
                                        for ox in 0..ow {
                                            let mut acc = p(slot, false, oc);
                                            for ic in 0..c {
                                                for ky in 0..k {
                                                    for kx in 0..k {
                                                        let y = (oy * stride + ky) as isize - padding as isize;
                                                        let x = (ox * stride + kx) as isize - padding as isize;
                                                        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                                                            continue;
                                                        }
                                                        let wi = ((oc * c + ic) * k + ky) * k + kx;
                                                        let xin = frame[(ic * h + y as usize) * w + x as usize];
                                                        acc = acc.add(p(slot, true, wi).mul(xin));
                                                    }
                                                }
                                            }
                                            out.push(acc);
                                        }
                                    }
                                }
                                out
                            })
                            .collect();
                        (Shape3::new(out_channels, oh, ow), cur)
                    }
                    LayerSpec::Fc { out_units } => {
                        let fan_in = c * h * w;
                        let cur = act
                            .iter()
                            .map(|frame| {
                                (0..out_units)
                                    .map(|i| {
                                        let mut acc = p(slot, false, i);
                                        for j in 0..fan_in {
                                            acc = acc.add(p(slot, true, i * fan_in + j).mul(frame[j]));
                                        }
                                        acc
                                    })
                                    .collect()
                            })
                            .collect();
                        (Shape3::new(out_units, 1, 1), cur)
                    }
                    _ => unreachable!(),
                };
                let n = out_shape.len();
                if slot + 1 == weighted {
                    // Readout: leaky integration, no spikes, logits = mean U.
                    let mut u = vec![D::c(0.0); n];
                    let mut total = vec![D::c(0.0); n];
                    for cur in &current {
                        for i in 0..n {
                            u[i] = u[i].scale(lif.tau).add(cur[i]);
                            total[i] = total[i].add(u[i]);
                        }
                    }
                    logits = total.into_iter().map(|t| t.scale(1.0 / tsteps as f64)).collect();
                } else {
                    let mut u = vec![D::c(0.0); n];
                    let mut x = vec![D::c(0.0); n];
                    let mut out = Vec::with_capacity(tsteps);
                    for cur in &current {
                        for i in 0..n {
                            // u = tau * u_prev * (1 - x_prev) + I
                            let keep = D { v: 1.0 - x[i].v, d: -x[i].d };
                            u[i] = u[i].scale(lif.tau).mul(keep).add(cur[i]);
                            let fired = if u[i].v >= lif.v_th { 1.0 } else { 0.0 };
                            x[i] = D { v: fired, d: lif.s(u[i].v) * u[i].d };
                        }
                        out.push(x.clone());
                    }
                    act = out;
                    spikes.push(act.iter().map(|f| f.iter().map(|d| d.v).collect()).collect());
                }
                shape = out_shape;
                slot += 1;
            }
        }
    }
    (spikes, logits)
}

fn random_spec(rng: &mut ChaCha8Rng) -> NetworkSpec {
    let mut layers = Vec::new();
    let input = if rng.gen_bool(0.5) {
        // Fully connected stack.
        let input = Shape3::new(1, 1, rng.gen_range(2..=6));
        for _ in 0..rng.gen_range(1..=2) {
            layers.push(LayerSpec::fc(rng.gen_range(2..=8)));
        }
        input
    } else {
        let input = Shape3::new(rng.gen_range(1..=2), rng.gen_range(4..=5), rng.gen_range(4..=5));
        let (k, stride, padding) = (rng.gen_range(1..=3), rng.gen_range(1..=2), rng.gen_range(0..=1));
        layers.push(LayerSpec::Conv { out_channels: rng.gen_range(1..=3), kernel_size: k, stride, padding });
        let side = (input.height.min(input.width) + 2 * padding - k) / stride + 1;
        match if side >= 2 { rng.gen_range(0..3) } else { 2 } {
            0 => layers.push(LayerSpec::avg_pool(2)),
            1 => layers.push(LayerSpec::max_pool(2)),
            _ => {}
        }
        input
    };
    layers.push(LayerSpec::fc(rng.gen_range(2..=4)));
    let mut spec = NetworkSpec::new(input, layers);
    spec.time_steps = rng.gen_range(1..=4);
    spec.tau = rng.gen_range(0.0..0.9);
    spec.v_th = rng.gen_range(0.2..1.0);
    spec.surrogate_width = rng.gen_range(0.5..2.0);
    spec.surrogate_window = if rng.gen_bool(0.5) { SurrogateWindow::Open } else { SurrogateWindow::Closed };
    spec
}

fn random_mask(net: &Network, rng: &mut ChaCha8Rng) -> StructureMask {
    let mut mask = StructureMask::all_alive(net);
    for slot in 0..net.weighted_count() - 1 {
        for u in 0..net.layouts()[slot].units {
            if rng.gen_bool(0.25) {
                mask.kill_unit(slot, u);
                for s in u * net.layouts()[slot].fan_in..(u + 1) * net.layouts()[slot].fan_in {
                    if rng.gen_bool(0.2) {
                        mask.revive_synapse(slot, s, false);
                    }
                }
            }
        }
    }
    mask
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()) + ABS_FLOOR
}

/// Runs `cases` random networks through both implementations. Returns the
/// number of (layer, sample, step) spike maps that held at least one spike.
pub fn check_gradients(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spiking_cases = 0;
    for case in 0..cases {
        let spec = random_spec(&mut rng);
        let net = Network::new(spec.clone()).map_err(|e| e.to_string())?;
        let mut params = Parameters::init(&net, &mut rng);
        // Larger weights than the default init so spikes actually happen.
        for l in &mut params.layers {
            l.weights.iter_mut().for_each(|w| *w *= 3.0);
            l.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.3..0.6));
        }
        let mask = random_mask(&net, &mut rng);
        let batch_n = rng.gen_range(1..=3);
        let t = spec.time_steps;
        let frame = spec.input_shape.len();
        let data: Vec<f64> = (0..batch_n * t * frame).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<usize> = (0..batch_n).map(|_| rng.gen_range(0..net.class_count())).collect();
        let batch = InputBatch::new(batch_n, t, spec.input_shape, data.clone()).map_err(|e| e.to_string())?;

        let (states, logits) = forward_pass(&net, &params, &mask, &batch).map_err(|e| e.to_string())?;
        let (_, dlogits) = softmax_cross_entropy(&logits, &labels).map_err(|e| e.to_string())?;
        let grads = backward_pass(&net, &states, &params, &mask, &dlogits).map_err(|e| e.to_string())?;

        let eff = params.masked(&mask);
        let eff = Eff {
            w: eff.layers.iter().map(|l| l.weights.clone()).collect(),
            b: eff.layers.iter().map(|l| l.bias.clone()).collect(),
        };
        let sample_frames = |s: usize| -> Vec<Vec<f64>> {
            (0..t).map(|k| data[(s * t + k) * frame..(s * t + k + 1) * frame].to_vec()).collect()
        };

        // Forward: spikes exact, logits to rounding.
        for s in 0..batch_n {
            let (ref_spikes, ref_logits) = reference(&spec, &eff, &sample_frames(s), None);
            for (l, per_t) in ref_spikes.iter().enumerate() {
                for (k, x) in per_t.iter().enumerate() {
                    ensure!(states.spikes(l, s, k) == &x[..], "case {case}: spikes layer {l} sample {s} t {k}");
                    spiking_cases += usize::from(x.iter().any(|&v| v > 0.0));
                }
            }
            for (a, b) in logits[s].iter().zip(&ref_logits) {
                ensure!(close(*a, b.v), "case {case}: logit {a} vs {}", b.v);
            }
        }

        // Backward: one tangent pass per effective parameter.
        let n = batch_n as f64;
        let dloss = |seed: (usize, bool, usize)| -> f64 {
            let mut total = 0.0;
            for (s, &y) in labels.iter().enumerate() {
                let (_, z) = reference(&spec, &eff, &sample_frames(s), Some(seed));
                let max = z.iter().map(|d| d.v).fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = z.iter().map(|d| (d.v - max).exp()).sum();
                for (k, zk) in z.iter().enumerate() {
                    let p = (zk.v - max).exp() / sum;
                    total += (p - f64::from(u8::from(k == y))) * zk.d / n;
                }
            }
            total
        };
        for (slot, g) in grads.layers.iter().enumerate() {
            for (i, &gw) in g.weights.iter().enumerate() {
                let r = dloss((slot, true, i));
                ensure!(close(gw, r), "case {case}: dW[{slot}][{i}] = {gw}, reference {r}");
            }
            for (i, &gb) in g.bias.iter().enumerate() {
                let r = dloss((slot, false, i));
                ensure!(close(gb, r), "case {case}: dB[{slot}][{i}] = {gb}, reference {r}");
            }
        }
    }
    ensure!(spiking_cases > cases, "random networks barely spike; the oracle would be vacuous");
    Ok(spiking_cases)
}
