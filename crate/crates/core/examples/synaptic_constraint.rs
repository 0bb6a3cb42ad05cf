//! Boundary dynamics of one synapse: a weight pushed steadily upward gets
//! clamped until the streak is long enough to widen the boundary, then a
//! shrinking weight contracts both boundaries.

use sparse_snn::constraint::{ConstraintConfig, SynapseCell};

fn main() {
    let cfg = ConstraintConfig { t_num: 3, epsilon: 0.75 };
    let mut cell = SynapseCell::with_bound(1.0);
    let mut prev = 0.9;
    println!("epoch  raw     clamped  r_pos   r_neg    n_pos n_decay event");
    for epoch in 1..=14 {
        let raw = if epoch <= 6 { prev + 0.2 } else { prev * 0.8 };
        let (w, ev) = cell.apply(raw, prev, &cfg);
        let event = match (ev.expanded, ev.contracted) {
            (true, _) => "expand",
            (_, true) => "contract",
            _ if ev.clamped => "clamp",
            _ => "",
        };
        println!(
            "{epoch:<6} {raw:<7.4} {w:<8.4} {:<7.4} {:<8.4} {:<5} {:<7} {event}",
            cell.r_pos, cell.r_neg, cell.n_pos, cell.n_decay
        );
        prev = w;
    }
}
