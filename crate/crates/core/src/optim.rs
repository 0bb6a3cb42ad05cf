use serde::{Deserialize, Serialize};

use crate::error::{contract, Result, SnnError};
use crate::mask::StructureMask;
use crate::params::{Gradients, Parameters};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moments plus the step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    m: Parameters,
    v: Parameters,
}

impl Adam {
    pub fn new(config: AdamConfig, like: &Parameters) -> Self {
        let mut m = like.clone();
        m.fill(0.0);
        let v = m.clone();
        Self { config, step: 0, m, v }
    }

    /// One masked Adam update. Only alive synapses and biases of alive units
    /// move; dead entries are written as exactly zero and their moments are
    /// cleared so a revived synapse starts fresh.
    pub fn step(&mut self, params: &mut Parameters, grads: &Gradients, mask: &StructureMask) -> Result<()> {
        if !params.same_layout(grads) || !params.same_layout(&self.m) || params.layers.len() != mask.layers.len() {
            return Err(contract("optimizer step shapes disagree"));
        }
        if let Some((slot, _)) = grads
            .layers
            .iter()
            .enumerate()
            .find(|(_, g)| g.weights.iter().chain(&g.bias).any(|v| !v.is_finite()))
        {
            return Err(SnnError::NonFinite(format!("gradient of layer {slot} after step {}", self.step)));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64, alive: bool| {
            if !alive {
                *p = 0.0;
                *m = 0.0;
                *v = 0.0;
                return;
            }
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (slot, p) in params.layers.iter_mut().enumerate() {
            let g = &grads.layers[slot];
            let (m, v) = (&mut self.m.layers[slot], &mut self.v.layers[slot]);
            let lm = &mask.layers[slot];
            for i in 0..p.weights.len() {
                update(&mut p.weights[i], g.weights[i], &mut m.weights[i], &mut v.weights[i], lm.syn_alive[i]);
            }
            for i in 0..p.bias.len() {
                update(&mut p.bias[i], g.bias[i], &mut m.bias[i], &mut v.bias[i], lm.unit_alive[i]);
            }
        }
        Ok(())
    }
}
