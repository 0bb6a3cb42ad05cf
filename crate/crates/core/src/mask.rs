use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::network::Network;

/// Alive flags for one weighted layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerMask {
    pub unit_alive: Vec<bool>,
    /// Units removed by pruning. A pruned unit stays pruned when
    /// regeneration brings some of its synapses back, unless the revival
    /// explicitly releases it.
    pub unit_pruned: Vec<bool>,
    /// Row-major `[unit][fan_in]`, same layout as the weights.
    pub syn_alive: Vec<bool>,
    pub fan_in: usize,
}

impl LayerMask {
    pub fn alive_units(&self) -> usize {
        self.unit_alive.iter().filter(|&&a| a).count()
    }

    pub fn retained_units(&self) -> usize {
        self.unit_pruned.iter().filter(|&&p| !p).count()
    }

    pub fn dead_synapses(&self) -> usize {
        self.syn_alive.iter().filter(|&&a| !a).count()
    }

    pub fn unit_synapses(&self, unit: usize) -> &[bool] {
        &self.syn_alive[unit * self.fan_in..(unit + 1) * self.fan_in]
    }

    pub fn unit_of(&self, synapse: usize) -> usize {
        synapse / self.fan_in
    }
}

/// Pruning and regeneration state: which units and synapses are alive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureMask {
    pub layers: Vec<LayerMask>,
}

impl StructureMask {
    pub fn all_alive(net: &Network) -> Self {
        let layers = net
            .layouts()
            .iter()
            .map(|l| LayerMask {
                unit_alive: vec![true; l.units],
                unit_pruned: vec![false; l.units],
                syn_alive: vec![true; l.synapses()],
                fan_in: l.fan_in,
            })
            .collect();
        Self { layers }
    }

    pub fn check_layout(&self, net: &Network) -> Result<()> {
        let ok = self.layers.len() == net.weighted_count()
            && self.layers.iter().zip(net.layouts()).all(|(m, l)| {
                m.unit_alive.len() == l.units
                    && m.unit_pruned.len() == l.units
                    && m.syn_alive.len() == l.synapses() && m.fan_in == l.fan_in
            });
        if ok {
            Ok(())
        } else {
            Err(contract("structure mask does not match network layout"))
        }
    }

    /// Prunes `unit` together with all of its incoming synapses.
    pub fn kill_unit(&mut self, slot: usize, unit: usize) {
        let layer = &mut self.layers[slot];
        layer.unit_alive[unit] = false;
        layer.unit_pruned[unit] = true;
        let n = layer.fan_in;
        layer.syn_alive[unit * n..(unit + 1) * n].fill(false);
    }

    /// Revives one synapse and the unit that owns it. With `release` the
    /// unit also leaves the pruned set and can be pruned again.
    pub fn revive_synapse(&mut self, slot: usize, synapse: usize, release: bool) {
        let layer = &mut self.layers[slot];
        layer.syn_alive[synapse] = true;
        let unit = layer.unit_of(synapse);
        layer.unit_alive[unit] = true;
        if release {
            layer.unit_pruned[unit] = false;
        }
    }

    pub fn alive_counts(&self) -> Vec<usize> {
        self.layers.iter().map(LayerMask::alive_units).collect()
    }

    /// Units not in the pruned set, per layer.
    pub fn retained_counts(&self) -> Vec<usize> {
        self.layers.iter().map(LayerMask::retained_units).collect()
    }

    pub fn dead_synapses(&self) -> usize {
        self.layers.iter().map(LayerMask::dead_synapses).sum()
    }

    pub fn total_synapses(&self) -> usize {
        self.layers.iter().map(|l| l.syn_alive.len()).sum()
    }
}
