use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::mask::StructureMask;
use crate::network::{Network, WeightLayout};

/// Weights and biases of one conv or fc layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub layout: WeightLayout,
    /// Row-major `[unit][fan_in]`; for conv the fan-in is `in_ch * k * k`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(layout: WeightLayout) -> Self {
        Self { layout, weights: vec![0.0; layout.synapses()], bias: vec![0.0; layout.units] }
    }

    /// Incoming synapses of `unit`.
    pub fn unit_weights(&self, unit: usize) -> &[f64] {
        let n = self.layout.fan_in;
        &self.weights[unit * n..(unit + 1) * n]
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()))
    }
}

/// Trainable state of every weighted layer, input side first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub layers: Vec<LayerParams>,
}

/// Loss gradients share the parameter layout. Entries exist for masked
/// synapses too so regeneration can rank them.
pub type Gradients = Parameters;

impl Parameters {
    pub fn zeros(net: &Network) -> Self {
        Self { layers: net.layouts().iter().copied().map(LayerParams::zeros).collect() }
    }

    /// Uniform fan-in initialisation: every weight and bias is drawn from
    /// `U(-b, b)` with `b = sqrt(1 / fan_in)`.
    pub fn init<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> Self {
        let layers = net
            .layouts()
            .iter()
            .map(|&layout| {
                let bound = (1.0 / layout.fan_in as f64).sqrt();
                let mut draw = || rng.gen_range(-bound..bound);
                let weights = (0..layout.synapses()).map(|_| draw()).collect();
                let bias = (0..layout.units).map(|_| draw()).collect();
                LayerParams { layout, weights, bias }
            })
            .collect();
        Self { layers }
    }

    pub fn check_layout(&self, net: &Network) -> Result<()> {
        if self.layers.len() != net.weighted_count() {
            return Err(contract(format!(
                "parameters have {} weighted layers, network has {}",
                self.layers.len(),
                net.weighted_count()
            )));
        }
        for (slot, (p, layout)) in self.layers.iter().zip(net.layouts()).enumerate() {
            if p.layout != *layout || p.weights.len() != layout.synapses() || p.bias.len() != layout.units {
                return Err(contract(format!("parameter layer {slot} does not match network layout")));
            }
        }
        Ok(())
    }

    pub fn same_layout(&self, other: &Parameters) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.layout == b.layout && a.weights.len() == b.weights.len() && a.bias.len() == b.bias.len()
            })
    }

    /// Copy with dead synapses and the biases of dead units set to zero.
    pub fn masked(&self, mask: &StructureMask) -> Parameters {
        let layers = self
            .layers
            .iter()
            .zip(&mask.layers)
            .map(|(p, m)| LayerParams {
                layout: p.layout,
                weights: p
                    .weights
                    .iter()
                    .zip(&m.syn_alive)
                    .map(|(&w, &alive)| if alive { w } else { 0.0 })
                    .collect(),
                bias: p
                    .bias
                    .iter()
                    .zip(&m.unit_alive)
                    .map(|(&b, &alive)| if alive { b } else { 0.0 })
                    .collect(),
            })
            .collect();
        Parameters { layers }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn fill(&mut self, value: f64) {
        for l in &mut self.layers {
            l.weights.fill(value);
            l.bias.fill(value);
        }
    }

    /// `self += scale * |other|` elementwise.
    pub fn accumulate_abs(&mut self, other: &Parameters, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y.abs();
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y.abs();
            }
        }
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }
}
