//! Gradient-triggered regrowth of pruned synapses.
//!
//! Each epoch the gradient magnitudes of all conv and fc synapses, alive and
//! dead, are pooled and the `(100 - rho_g)` percentile becomes the hit
//! threshold. A dead synapse whose magnitude reaches the threshold extends
//! its hit streak `t_g`; a miss resets it. A zero gradient never counts as
//! a hit, even when ties at zero pull the threshold down to 0. Streaks
//! longer than `t_num` revive the synapse at weight zero and mark its unit
//! alive. The unit stays in the pruned set by default, so later pruning
//! passes leave its regrown synapses alone. The rate `rho_g` grows
//! geometrically with the epoch and saturates at 99%.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::mask::StructureMask;
use crate::params::{Gradients, Parameters};

pub const RHO_G_CAP: f64 = 99.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegenState {
    /// Regeneration rate, percent of the network.
    pub rho_g: f64,
    /// Growth base of the rate.
    pub gamma: f64,
    pub t_num: u32,
    /// Hit streak per synapse, weight layout.
    pub t_g: Vec<Vec<u32>>,
    /// Take a unit out of the pruned set when one of its synapses revives,
    /// making it a pruning candidate again.
    pub release_pruned: bool,
}

impl RegenState {
    pub fn new(rho_g: f64, gamma: f64, t_num: u32, mask: &StructureMask) -> Self {
        let t_g = mask.layers.iter().map(|l| vec![0; l.syn_alive.len()]).collect();
        Self { rho_g, gamma, t_num, t_g, release_pruned: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=RHO_G_CAP).contains(&self.rho_g) {
            return Err(contract(format!("rho_g {} outside [0, 99]", self.rho_g)));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(contract(format!("gamma {} must exceed 1", self.gamma)));
        }
        if self.t_num < 1 {
            return Err(contract("regeneration t_num must be >= 1"));
        }
        Ok(())
    }
}

/// `rho_g += gamma^(epoch - start)`, capped at 99.
pub fn update_regen_rate(state: &mut RegenState, epoch: usize, start_epoch: usize) -> Result<()> {
    if epoch <= start_epoch {
        return Err(contract(format!(
            "regeneration rate updated at epoch {epoch}, must follow start epoch {start_epoch}"
        )));
    }
    let k = (epoch - start_epoch) as i32;
    state.rho_g = (state.rho_g + state.gamma.powi(k)).min(RHO_G_CAP);
    Ok(())
}

/// Nearest-rank percentile of `values` (`p` in percent); 0 for no values.
pub fn percentile(values: &mut [f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    values[rank.clamp(1, n) - 1]
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegenReport {
    pub threshold: f64,
    /// Synapses revived per weighted layer.
    pub revived: Vec<usize>,
    /// Dead synapses that extended their streak this epoch.
    pub hits: usize,
}

impl RegenReport {
    pub fn total_revived(&self) -> usize {
        self.revived.iter().sum()
    }
}

/// One regeneration pass. `grads` holds the per-synapse gradient statistic
/// for the epoch (its sign is ignored). Revived synapses get weight 0 in
/// `params`; their boundaries are left untouched.
pub fn regenerate_step(
    grads: &Gradients,
    mask: &mut StructureMask,
    state: &mut RegenState,
    params: &mut Parameters,
) -> Result<RegenReport> {
    if !grads.same_layout(params)
        || mask.layers.len() != grads.layers.len()
        || state.t_g.len() != grads.layers.len()
        || grads
            .layers
            .iter()
            .zip(&mask.layers)
            .zip(&state.t_g)
            .any(|((g, m), t)| g.weights.len() != m.syn_alive.len() || t.len() != m.syn_alive.len())
    {
        return Err(contract("regeneration inputs have mismatched shapes"));
    }
    let mut report = RegenReport { revived: vec![0; grads.layers.len()], ..RegenReport::default() };
    if mask.dead_synapses() == 0 {
        for t in &mut state.t_g {
            t.fill(0);
        }
        return Ok(report);
    }

    let mut pooled: Vec<f64> = grads.layers.iter().flat_map(|l| l.weights.iter().map(|g| g.abs())).collect();
    let threshold = percentile(&mut pooled, 100.0 - state.rho_g);
    report.threshold = threshold;

    for (slot, g) in grads.layers.iter().enumerate() {
        let t_g = &mut state.t_g[slot];
        for (i, gv) in g.weights.iter().enumerate() {
            if mask.layers[slot].syn_alive[i] {
                t_g[i] = 0;
                continue;
            }
            let mag = gv.abs();
            if mag >= threshold && mag > 0.0 {
                t_g[i] += 1;
                report.hits += 1;
            } else {
                t_g[i] = 0;
            }
            if t_g[i] > state.t_num {
                mask.revive_synapse(slot, i, state.release_pruned);
                params.layers[slot].weights[i] = 0.0;
                t_g[i] = 0;
                report.revived[slot] += 1;
            }
        }
    }
    Ok(report)
}
