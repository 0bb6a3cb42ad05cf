//! Literal per-synapse boundary update and a random trajectory driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_snn::constraint::{ConstraintConfig, SynapseCell};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ref {
    pub rp: f64,
    pub rn: f64,
    pub np: u32,
    pub nn: u32,
    pub nd: u32,
    pub cp: f64,
    pub cn: f64,
}

/// One epoch, written out as plainly as possible.
pub fn reference(s: &mut Ref, w_now: f64, w_before: f64, t_num: u32, eps: f64) -> f64 {
    let mut w = w_now;
    if w > s.rp {
        s.np = s.np + 1;
        s.cp = s.cp + (w - s.rp);
        w = s.rp;
    } else {
        s.np = 0;
        s.cp = 0.0;
    }
    if w < s.rn {
        s.nn = s.nn + 1;
        s.cn = s.cn + (s.rn - w);
        w = s.rn;
    } else {
        s.nn = 0;
        s.cn = 0.0;
    }
    if w_now.abs() < w_before.abs() {
        s.nd = s.nd + 1;
    } else {
        s.nd = 0;
    }
    if s.np > t_num {
        s.rp = s.rp + s.cp / t_num as f64;
        s.np = 0;
        s.cp = 0.0;
    }
    if s.nn > t_num {
        s.rn = s.rn - s.cn / t_num as f64;
        s.nn = 0;
        s.cn = 0.0;
    }
    if s.nd > t_num {
        s.rp = s.rp * eps;
        s.rn = s.rn * eps;
        s.nd = 0;
    }
    w
}

/// Optimizer-like step: a regime picked per stretch of epochs.
fn step(rng: &mut ChaCha8Rng, regime: u8, w: f64) -> f64 {
    match regime {
        0 => rng.gen_range(0.0..0.15),
        1 => -rng.gen_range(0.0..0.15),
        2 => -w * rng.gen_range(0.01..0.3),
        3 => 0.0,
        _ => rng.gen_range(-0.3..0.3),
    }
}

pub fn matches(cell: &SynapseCell, r: &Ref) -> bool {
    cell.r_pos == r.rp
        && cell.r_neg == r.rn
        && cell.n_pos == r.np
        && cell.n_neg == r.nn
        && cell.n_decay == r.nd
        && cell.c_pos == r.cp
        && cell.c_neg == r.cn
}

/// Branch counts seen while replaying trajectories.
#[derive(Clone, Copy, Debug, Default)]
pub struct Coverage {
    pub expansions: usize,
    pub contractions: usize,
    pub clamps: usize,
}

/// Replays `trajectories` random weight sequences of `epochs` epochs through
/// [`SynapseCell::apply`] and the reference, comparing every field exactly.
pub fn check_trajectories(trajectories: usize, epochs: usize, seed: u64) -> Result<Coverage, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cov = Coverage::default();
    for case in 0..trajectories {
        let t_num = rng.gen_range(1..=6u32);
        let eps = rng.gen_range(0.3..0.95);
        let bound = rng.gen_range(0.05..1.0);
        let cfg = ConstraintConfig { t_num, epsilon: eps };
        let mut cell = SynapseCell::with_bound(bound);
        let mut r = Ref { rp: bound, rn: -bound, np: 0, nn: 0, nd: 0, cp: 0.0, cn: 0.0 };
        let mut prev = rng.gen_range(-bound..=bound);
        let mut regime = rng.gen_range(0..5u8);
        for epoch in 0..epochs {
            if rng.gen_bool(0.1) {
                regime = rng.gen_range(0..5u8);
            }
            let raw = prev + step(&mut rng, regime, prev);
            let (w, ev) = cell.apply(raw, prev, &cfg);
            let w_ref = reference(&mut r, raw, prev, t_num, eps);
            ensure!(w == w_ref, "case {case} epoch {epoch}: weight {w} vs {w_ref}");
            ensure!(matches(&cell, &r), "case {case} epoch {epoch}: {cell:?} vs {r:?}");
            ensure!(cell.r_pos >= 0.0 && cell.r_neg <= 0.0, "case {case} epoch {epoch}: bound sign");
            ensure!(cell.n_pos <= t_num && cell.n_neg <= t_num && cell.n_decay <= t_num, "case {case} epoch {epoch}: counter above t_num");
            ensure!(cell.c_pos == 0.0 || cell.n_pos > 0, "case {case} epoch {epoch}: stray c_pos");
            ensure!(cell.c_neg == 0.0 || cell.n_neg > 0, "case {case} epoch {epoch}: stray c_neg");
            cov.expansions += usize::from(ev.expanded);
            cov.contractions += usize::from(ev.contracted);
            cov.clamps += usize::from(ev.clamped);
            prev = w;
        }
    }
    Ok(cov)
}
