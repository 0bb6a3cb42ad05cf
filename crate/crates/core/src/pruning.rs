//! Structured pruning of conv channels and fc neurons.
//!
//! A unit's importance `D` is the summed boundary range of its alive
//! incoming synapses. Each prunable layer has a cumulative pruning rate
//! `rho` (percent of the layer's original units that should be dead); every
//! epoch the least important alive units are removed until the layer meets
//! that target. Rates grow by `delta * N[l] / N[l+1]` per epoch, where the
//! step size `delta` decays exponentially from `alpha` between the start and
//! mid epochs and stays at `beta` afterwards.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::constraint::SynapseBounds;
use crate::error::{contract, Result, SnnError};
use crate::mask::StructureMask;
use crate::network::Network;

/// How pruning-rate updates are shared between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMode {
    /// One rate for all conv layers and one for all fc layers, each updated
    /// from the ratio of that kind's deepest prunable layer.
    SharedPerKind,
    /// An independent rate per prunable layer.
    PerLayer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneSchedule {
    /// Conv pruning rate, percent.
    pub rho_conv: f64,
    /// Fc pruning rate, percent.
    pub rho_fc: f64,
    pub alpha: f64,
    pub beta: f64,
    pub start_epoch: usize,
    pub mid_epoch: usize,
    pub rho_cap: f64,
    pub rate_mode: RateMode,
    /// Per-slot rates, used in [`RateMode::PerLayer`]. Filled lazily from the
    /// kind rates on the first update.
    pub layer_rates: Vec<f64>,
}

impl Default for PruneSchedule {
    fn default() -> Self {
        Self {
            rho_conv: 10.0,
            rho_fc: 35.0,
            alpha: 1.0,
            beta: 0.00075,
            start_epoch: 36,
            mid_epoch: 60,
            rho_cap: 95.0,
            rate_mode: RateMode::SharedPerKind,
            layer_rates: Vec::new(),
        }
    }
}

impl PruneSchedule {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..=self.rho_cap).contains(&r);
        if !(0.0..100.0).contains(&self.rho_cap) {
            return Err(contract(format!("rho_cap {} outside [0, 100)", self.rho_cap)));
        }
        if !rate_ok(self.rho_conv) || !rate_ok(self.rho_fc) {
            return Err(contract(format!(
                "initial rates conv={} fc={} must lie in [0, rho_cap]",
                self.rho_conv, self.rho_fc
            )));
        }
        if self.start_epoch >= self.mid_epoch {
            return Err(contract("prune start epoch must precede the mid epoch"));
        }
        if self.alpha > 1.0 || self.beta > 1.0 || self.alpha < 0.0 || self.beta < 0.0 {
            return Err(contract("alpha and beta must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Current rate (percent) for weighted layer `slot`.
    pub fn rate_for(&self, net: &Network, slot: usize) -> f64 {
        match self.rate_mode {
            RateMode::PerLayer if !self.layer_rates.is_empty() => self.layer_rates[slot],
            _ => {
                if net.layouts()[slot].is_conv() {
                    self.rho_conv
                } else {
                    self.rho_fc
                }
            }
        }
    }
}

/// Weighted layers that may be pruned: every one except the readout.
pub fn prunable_slots(net: &Network) -> std::ops::Range<usize> {
    0..net.output_slot()
}

/// `D_i`: summed range over unit `i`'s alive incoming synapses, for each
/// unit of weighted layer `slot`.
pub fn neuron_importance(bounds: &SynapseBounds, mask: &StructureMask, slot: usize) -> Vec<f64> {
    let cells = &bounds.layers[slot];
    let lm = &mask.layers[slot];
    let n = lm.fan_in;
    (0..lm.unit_alive.len())
        .map(|u| {
            cells[u * n..(u + 1) * n]
                .iter()
                .zip(lm.unit_synapses(u))
                .filter(|(_, &alive)| alive)
                .map(|(c, _)| c.range())
                .sum()
        })
        .collect()
}

/// Pruning step size for `epoch`.
pub fn delta_schedule(epoch: usize, sched: &PruneSchedule) -> Result<f64> {
    if epoch < sched.start_epoch {
        return Err(contract(format!(
            "delta requested for epoch {epoch} before pruning starts at {}",
            sched.start_epoch
        )));
    }
    if epoch <= sched.mid_epoch {
        Ok(sched.alpha * (-((epoch - sched.start_epoch) as f64)).exp())
    } else {
        Ok(sched.beta)
    }
}

/// Grows the pruning rates by `delta * N[l] / N[l+1]`, capped at `rho_cap`.
/// `alive_counts` holds the current unit count of every weighted layer,
/// readout included. The trainer passes the retained (unpruned) counts.
pub fn update_prune_rates(
    sched: &mut PruneSchedule,
    net: &Network,
    epoch: usize,
    alive_counts: &[usize],
) -> Result<()> {
    if alive_counts.len() != net.weighted_count() {
        return Err(contract("alive_counts must cover every weighted layer"));
    }
    let delta = delta_schedule(epoch, sched)?;
    let ratio = |slot: usize| -> Result<f64> {
        let next = alive_counts[slot + 1];
        if next == 0 {
            return Err(SnnError::DeadSuccessor { layer: slot + 1 });
        }
        Ok(alive_counts[slot] as f64 / next as f64)
    };
    let cap = sched.rho_cap;
    match sched.rate_mode {
        RateMode::SharedPerKind => {
            let slots = prunable_slots(net);
            let deepest_conv = slots.clone().filter(|&s| net.layouts()[s].is_conv()).last();
            let deepest_fc = slots.filter(|&s| !net.layouts()[s].is_conv()).last();
            if let Some(s) = deepest_conv {
                sched.rho_conv = (sched.rho_conv + delta * ratio(s)?).min(cap);
            }
            if let Some(s) = deepest_fc {
                sched.rho_fc = (sched.rho_fc + delta * ratio(s)?).min(cap);
            }
        }
        RateMode::PerLayer => {
            if sched.layer_rates.is_empty() {
                sched.layer_rates = (0..net.weighted_count())
                    .map(|s| if net.layouts()[s].is_conv() { sched.rho_conv } else { sched.rho_fc })
                    .collect();
            }
            for s in prunable_slots(net) {
                sched.layer_rates[s] = (sched.layer_rates[s] + delta * ratio(s)?).min(cap);
            }
        }
    }
    Ok(())
}

/// Dead-unit target for a layer of `original` units at `rate` percent.
pub fn target_dead(rate: f64, original: usize) -> usize {
    ((rate * original as f64) / 100.0).floor() as usize
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PruneReport {
    /// Units killed in each weighted layer.
    pub killed: Vec<usize>,
    /// Slots whose target had to be clamped to keep one unit alive.
    pub clamped: Vec<usize>,
}

/// Prunes the least important retained units of every prunable layer until
/// the layer's pruned count reaches its target. Ties in `D` go to the lower unit
/// index. The readout layer is never touched and every layer keeps at least
/// one alive unit.
pub fn prune_step(
    net: &Network,
    importance: &[Vec<f64>],
    mask: &mut StructureMask,
    sched: &PruneSchedule,
) -> Result<PruneReport> {
    mask.check_layout(net)?;
    if importance.len() != net.weighted_count()
        || importance.iter().zip(net.layouts()).any(|(d, l)| d.len() != l.units)
    {
        return Err(contract("importance must hold one value per unit of every weighted layer"));
    }
    let mut report = PruneReport { killed: vec![0; net.weighted_count()], clamped: Vec::new() };
    for slot in prunable_slots(net) {
        let original = net.layouts()[slot].units;
        let mut target = target_dead(sched.rate_for(net, slot), original);
        if target > original - 1 {
            warn!("layer {slot}: pruning target {target} of {original} clamped to keep one unit alive");
            target = original - 1;
            report.clamped.push(slot);
        }
        let lm = &mask.layers[slot];
        let dead = original - lm.retained_units();
        if dead >= target {
            continue;
        }
        let d = &importance[slot];
        let mut retained: Vec<usize> = (0..original).filter(|&u| !lm.unit_pruned[u]).collect();
        retained.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        for &u in retained.iter().take(target - dead) {
            mask.kill_unit(slot, u);
        }
        report.killed[slot] = target - dead;
    }
    Ok(report)
}

/// Percentage of conv and fc synapses that are dead. Biases do not count.
pub fn compression_rate(mask: &StructureMask) -> f64 {
    let total = mask.total_synapses();
    if total == 0 {
        return 0.0;
    }
    100.0 * mask.dead_synapses() as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{init_boundaries, SynapseCell};
    use crate::network::{LayerSpec, NetworkSpec, Shape3};
    use crate::params::Parameters;

    fn fc_net(hidden: usize) -> Network {
        Network::new(NetworkSpec::new(Shape3::new(3, 1, 1), vec![LayerSpec::fc(hidden), LayerSpec::fc(2)]))
            .unwrap()
    }

    fn sched(rho: f64) -> PruneSchedule {
        PruneSchedule { rho_conv: rho, rho_fc: rho, ..PruneSchedule::default() }
    }

    #[test]
    fn importance_sums_alive_ranges() {
        let net = fc_net(2);
        let mut bounds = init_boundaries(&Parameters::zeros(&net));
        for (c, r) in bounds.layers[0][..3].iter_mut().zip([0.1, 0.2, 0.3]) {
            *c = SynapseCell { r_pos: r / 2.0, r_neg: -r / 2.0, ..Default::default() };
        }
        let mut mask = StructureMask::all_alive(&net);
        let d = neuron_importance(&bounds, &mask, 0);
        assert!((d[0] - 0.6).abs() < 1e-12);
        assert_eq!(d[1], 0.0);

        mask.layers[0].syn_alive[2] = false;
        let d = neuron_importance(&bounds, &mask, 0);
        assert!((d[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn delta_examples() {
        let s = PruneSchedule::default();
        assert_eq!(delta_schedule(36, &s).unwrap(), 1.0);
        assert!((delta_schedule(38, &s).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(delta_schedule(60, &s).unwrap(), (-24.0f64).exp());
        assert_eq!(delta_schedule(61, &s).unwrap(), 0.00075);
        assert!(delta_schedule(35, &s).is_err());
    }

    #[test]
    fn rate_update_examples() {
        // 300 -> 10 fc with delta = 1 at the start epoch.
        let net = Network::new(NetworkSpec::new(Shape3::new(4, 1, 1), vec![LayerSpec::fc(300), LayerSpec::fc(10)]))
            .unwrap();
        let mut s = PruneSchedule { rho_fc: 35.0, ..PruneSchedule::default() };
        let start = s.start_epoch;
        update_prune_rates(&mut s, &net, start, &[300, 10]).unwrap();
        assert_eq!(s.rho_fc, 65.0);

        let mut s = PruneSchedule { rho_fc: 35.0, alpha: 0.0, ..PruneSchedule::default() };
        let before = s.clone();
        update_prune_rates(&mut s, &net, 40, &[300, 10]).unwrap();
        assert_eq!(s, before);

        let mut s = PruneSchedule { rho_fc: 94.0, ..PruneSchedule::default() };
        update_prune_rates(&mut s, &net, 36, &[300, 10]).unwrap();
        assert_eq!(s.rho_fc, 95.0);

        let mut s = PruneSchedule::default();
        assert!(matches!(
            update_prune_rates(&mut s, &net, 36, &[300, 0]),
            Err(SnnError::DeadSuccessor { layer: 1 })
        ));
    }

    #[test]
    fn shared_rates_use_deepest_layer_of_kind() {
        let net = Network::new(NetworkSpec::new(
            Shape3::new(1, 4, 4),
            vec![LayerSpec::conv(4, 3), LayerSpec::conv(8, 3), LayerSpec::fc(20), LayerSpec::fc(5), LayerSpec::fc(2)],
        ))
        .unwrap();
        let mut s = PruneSchedule { rho_conv: 10.0, rho_fc: 30.0, ..PruneSchedule::default() };
        update_prune_rates(&mut s, &net, 36, &[4, 8, 20, 5, 2]).unwrap();
        assert_eq!(s.rho_conv, 10.0 + 8.0 / 20.0);
        assert_eq!(s.rho_fc, 30.0 + 5.0 / 2.0);

        let mut p = PruneSchedule { rate_mode: RateMode::PerLayer, ..PruneSchedule { rho_conv: 10.0, rho_fc: 30.0, ..PruneSchedule::default() } };
        update_prune_rates(&mut p, &net, 36, &[4, 8, 20, 5, 2]).unwrap();
        assert_eq!(p.layer_rates, vec![10.0 + 0.5, 10.0 + 0.4, 30.0 + 4.0, 30.0 + 2.5, 30.0]);
        assert_eq!(p.rate_for(&net, 2), 34.0);
    }

    #[test]
    fn prune_kills_lowest_importance() {
        let net = fc_net(4);
        let mut mask = StructureMask::all_alive(&net);
        let d = vec![vec![0.1, 0.4, 0.3, 0.2], vec![0.0; 2]];
        let r = prune_step(&net, &d, &mut mask, &sched(50.0)).unwrap();
        assert_eq!(mask.layers[0].unit_alive, vec![false, true, true, false]);
        assert_eq!(r.killed, vec![2, 0]);
        assert!(mask.layers[1].unit_alive.iter().all(|&a| a));
    }

    #[test]
    fn prune_below_one_unit_is_noop() {
        let net = fc_net(4);
        let mut mask = StructureMask::all_alive(&net);
        let d = vec![vec![0.1, 0.4, 0.3, 0.2], vec![0.0; 2]];
        prune_step(&net, &d, &mut mask, &sched(24.0)).unwrap();
        assert_eq!(mask, StructureMask::all_alive(&net));
    }

    #[test]
    fn prune_ties_break_by_index() {
        let net = fc_net(4);
        let mut mask = StructureMask::all_alive(&net);
        let d = vec![vec![0.5; 4], vec![0.0; 2]];
        prune_step(&net, &d, &mut mask, &sched(25.0)).unwrap();
        assert_eq!(mask.layers[0].unit_alive, vec![false, true, true, true]);
    }

    #[test]
    fn prune_keeps_one_unit() {
        let net = fc_net(4);
        let mut mask = StructureMask::all_alive(&net);
        let d = vec![vec![0.1, 0.4, 0.3, 0.2], vec![0.0; 2]];
        let s = sched(100.0);
        let r = prune_step(&net, &d, &mut mask, &s).unwrap();
        assert_eq!(mask.layers[0].alive_units(), 1);
        assert!(mask.layers[0].unit_alive[1]);
        assert_eq!(r.clamped, vec![0]);
    }

    #[test]
    fn prune_only_makes_up_the_shortfall() {
        let net = fc_net(4);
        let mut mask = StructureMask::all_alive(&net);
        mask.kill_unit(0, 2);
        let d = vec![vec![0.1, 0.4, 0.0, 0.2], vec![0.0; 2]];
        let r = prune_step(&net, &d, &mut mask, &sched(50.0)).unwrap();
        assert_eq!(r.killed[0], 1);
        assert_eq!(mask.layers[0].unit_alive, vec![false, true, false, true]);
    }

    #[test]
    fn compression_counts_dead_synapses() {
        let net = fc_net(4);
        let mut mask = StructureMask::all_alive(&net);
        assert_eq!(compression_rate(&mask), 0.0);
        // 12 + 8 synapses; kill two hidden units (6) and four readout synapses.
        mask.kill_unit(0, 0);
        mask.kill_unit(0, 1);
        mask.layers[1].syn_alive[..4].fill(false);
        assert_eq!(compression_rate(&mask), 50.0);
    }
}
