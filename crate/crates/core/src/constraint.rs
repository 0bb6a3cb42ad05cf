//! Dendritic-spine style synaptic boundaries.
//!
//! Every synapse carries a positive boundary `r_pos >= 0` and a negative
//! boundary `r_neg <= 0`. Once per epoch the weight is clamped into
//! `[r_neg, r_pos]`, and three streak counters decide whether the
//! boundaries move:
//!
//! * `n_pos` / `n_neg` count consecutive epochs in which the weight
//!   overshot the boundary, with the overshoot summed in `c_pos` / `c_neg`.
//!   A streak longer than `t_num` widens the boundary by the mean overshoot
//!   `c / t_num`.
//! * `n_decay` counts consecutive epochs in which `|w|` shrank. A streak
//!   longer than `t_num` scales both boundaries by `epsilon`.
//!
//! Streak counters and accumulators restart at zero after they fire. The
//! decay comparison uses the weight as the optimizer left it, before this
//! epoch's clamp. Boundary updates happen after clamping, so a contraction
//! can leave the weight outside the new interval until the next call.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::params::Parameters;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    /// Streak length that triggers a boundary update.
    pub t_num: u32,
    /// Contraction factor.
    pub epsilon: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self { t_num: 18, epsilon: 0.75 }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_num < 1 {
            return Err(contract("constraint t_num must be >= 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(contract(format!("constraint epsilon {} outside (0, 1)", self.epsilon)));
        }
        Ok(())
    }
}

/// Boundary and counter state of a single synapse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynapseCell {
    pub r_pos: f64,
    pub r_neg: f64,
    pub n_pos: u32,
    pub n_neg: u32,
    pub n_decay: u32,
    pub c_pos: f64,
    pub c_neg: f64,
}

/// What happened to one synapse during a constraint pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CellEvents {
    pub clamped: bool,
    pub expanded: bool,
    pub contracted: bool,
}

impl SynapseCell {
    pub fn with_bound(bound: f64) -> Self {
        Self { r_pos: bound, r_neg: -bound, ..Self::default() }
    }

    /// `r_pos - r_neg`, the importance of the synapse.
    pub fn range(&self) -> f64 {
        self.r_pos - self.r_neg
    }

    /// One epoch of the constraint for this synapse; returns the clamped
    /// weight.
    pub fn apply(&mut self, w: f64, w_prev: f64, cfg: &ConstraintConfig) -> (f64, CellEvents) {
        let mut ev = CellEvents::default();
        let raw = w;
        let mut w = w;

        if w > self.r_pos {
            self.n_pos += 1;
            self.c_pos += w - self.r_pos;
            w = self.r_pos;
            ev.clamped = true;
        } else {
            self.n_pos = 0;
            self.c_pos = 0.0;
        }
        if w < self.r_neg {
            self.n_neg += 1;
            self.c_neg += self.r_neg - w;
            w = self.r_neg;
            ev.clamped = true;
        } else {
            self.n_neg = 0;
            self.c_neg = 0.0;
        }
        if raw.abs() < w_prev.abs() {
            self.n_decay += 1;
        } else {
            self.n_decay = 0;
        }

        let t_num = f64::from(cfg.t_num);
        if self.n_pos > cfg.t_num {
            self.r_pos += self.c_pos / t_num;
            self.n_pos = 0;
            self.c_pos = 0.0;
            ev.expanded = true;
        }
        if self.n_neg > cfg.t_num {
            self.r_neg -= self.c_neg / t_num;
            self.n_neg = 0;
            self.c_neg = 0.0;
            ev.expanded = true;
        }
        if self.n_decay > cfg.t_num {
            self.r_pos *= cfg.epsilon;
            self.r_neg *= cfg.epsilon;
            self.n_decay = 0;
            ev.contracted = true;
        }
        (w, ev)
    }
}

/// Boundaries of every synapse, same layout as the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynapseBounds {
    pub layers: Vec<Vec<SynapseCell>>,
}

/// Per-call tallies over all synapses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConstraintStats {
    pub clamped: usize,
    pub expanded: usize,
    pub contracted: usize,
}

/// Initial boundaries: `±max|W|` of the synapse's layer, counters zero.
pub fn init_boundaries(params: &Parameters) -> SynapseBounds {
    let layers = params
        .layers
        .iter()
        .map(|l| vec![SynapseCell::with_bound(l.max_abs_weight()); l.weights.len()])
        .collect();
    SynapseBounds { layers }
}

/// Clamps `weights` in place against `bounds` and updates the boundaries.
/// `prev` holds last epoch's clamped weights (the initial weights on the
/// first call).
pub fn apply_constraint(
    weights: &mut Parameters,
    prev: &Parameters,
    bounds: &mut SynapseBounds,
    cfg: &ConstraintConfig,
) -> Result<ConstraintStats> {
    if !weights.same_layout(prev)
        || bounds.layers.len() != weights.layers.len()
        || bounds.layers.iter().zip(&weights.layers).any(|(b, w)| b.len() != w.weights.len())
    {
        return Err(contract("constraint inputs have mismatched shapes"));
    }
    let mut stats = ConstraintStats::default();
    for ((layer, prev_layer), cells) in weights.layers.iter_mut().zip(&prev.layers).zip(&mut bounds.layers) {
        for ((w, &wp), cell) in layer.weights.iter_mut().zip(&prev_layer.weights).zip(cells.iter_mut()) {
            let (clamped, ev) = cell.apply(*w, wp, cfg);
            *w = clamped;
            stats.clamped += usize::from(ev.clamped);
            stats.expanded += usize::from(ev.expanded);
            stats.contracted += usize::from(ev.contracted);
        }
    }
    Ok(stats)
}

/// `Range = r_pos - r_neg` for every synapse, per layer.
pub fn synapse_range(bounds: &SynapseBounds) -> Vec<Vec<f64>> {
    bounds.layers.iter().map(|cells| cells.iter().map(SynapseCell::range).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LayerSpec, Network, NetworkSpec, Shape3};

    fn cfg(t_num: u32) -> ConstraintConfig {
        ConstraintConfig { t_num, epsilon: 0.75 }
    }

    #[test]
    fn init_uses_layer_max() {
        let net = Network::new(NetworkSpec::new(Shape3::new(3, 1, 1), vec![LayerSpec::fc(1), LayerSpec::fc(2)]))
            .unwrap();
        let mut p = Parameters::zeros(&net);
        p.layers[0].weights.copy_from_slice(&[0.3, -0.8, 0.1]);
        p.layers[1].weights.copy_from_slice(&[0.2, -0.05]);
        let b = init_boundaries(&p);
        assert!(b.layers[0].iter().all(|c| c.r_pos == 0.8 && c.r_neg == -0.8 && c.n_pos == 0));
        assert!(b.layers[1].iter().all(|c| c.r_pos == 0.2 && c.r_neg == -0.2));

        let zero = init_boundaries(&Parameters::zeros(&net));
        assert!(zero.layers.iter().flatten().all(|c| c.r_pos == 0.0 && c.r_neg == 0.0));
    }

    #[test]
    fn expansion_after_streak() {
        let c = cfg(3);
        let mut cell = SynapseCell::with_bound(1.0);
        let mut prev = 1.0;
        for (k, over) in [0.1, 0.2, 0.3, 0.4].into_iter().enumerate() {
            let (w, ev) = cell.apply(1.0 + over, prev, &c);
            assert_eq!(w, 1.0, "clamped to the old boundary");
            assert_eq!(ev.expanded, k == 3);
            prev = w;
        }
        // Mean overshoot is taken over t_num, not the streak length.
        assert!((cell.r_pos - (1.0 + (0.1 + 0.2 + 0.3 + 0.4) / 3.0)).abs() < 1e-12);
        assert_eq!((cell.n_pos, cell.c_pos), (0, 0.0));
        assert_eq!(cell.r_neg, -1.0);
    }

    #[test]
    fn inside_weight_resets_counters() {
        let mut cell = SynapseCell { n_pos: 2, c_pos: 0.4, n_neg: 1, c_neg: 0.1, n_decay: 2, ..SynapseCell::with_bound(1.0) };
        let (w, ev) = cell.apply(0.3, 0.2, &cfg(3));
        assert_eq!(w, 0.3);
        assert_eq!(ev, CellEvents::default());
        assert_eq!((cell.n_pos, cell.n_neg, cell.n_decay), (0, 0, 0));
        assert_eq!((cell.c_pos, cell.c_neg), (0.0, 0.0));
    }

    #[test]
    fn contraction_after_decay_streak() {
        let c = cfg(3);
        let mut cell = SynapseCell::with_bound(1.0);
        let mut prev = 0.9;
        for k in 0..4 {
            let w = prev - 0.1;
            let (out, ev) = cell.apply(w, prev, &c);
            assert_eq!(ev.contracted, k == 3);
            prev = out;
        }
        assert_eq!((cell.r_pos, cell.r_neg), (0.75, -0.75));
        assert_eq!(cell.n_decay, 0);
    }

    #[test]
    fn negative_side_mirrors_positive() {
        let c = cfg(1);
        let mut cell = SynapseCell::with_bound(0.5);
        cell.apply(-0.7, -0.5, &c);
        let (w, ev) = cell.apply(-0.9, -0.5, &c);
        assert_eq!(w, -0.5);
        assert!(ev.expanded);
        assert!((cell.r_neg - (-0.5 - 0.6)).abs() < 1e-12);
    }

    #[test]
    fn range_examples() {
        assert_eq!(SynapseCell { r_pos: 0.5, r_neg: -0.3, ..Default::default() }.range(), 0.8);
        assert_eq!(SynapseCell::default().range(), 0.0);
        assert_eq!(SynapseCell::with_bound(0.25).range(), 0.5);
    }

    #[test]
    fn apply_constraint_rejects_mismatch() {
        let net = Network::new(NetworkSpec::new(Shape3::new(3, 1, 1), vec![LayerSpec::fc(2)])).unwrap();
        let mut p = Parameters::zeros(&net);
        let prev = p.clone();
        let mut b = init_boundaries(&p);
        b.layers[0].pop();
        assert!(apply_constraint(&mut p, &prev, &mut b, &cfg(3)).is_err());
    }
}
