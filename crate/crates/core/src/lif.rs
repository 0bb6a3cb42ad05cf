//! Leaky integrate-and-fire dynamics and the rectangular surrogate
//! derivative of the spike function.
//!
//! One step of a layer:
//!
//! ```text
//! u[t] = tau * u[t-1] * (1 - x[t-1]) + I[t]
//! x[t] = 1 if u[t] >= v_th else 0
//! ```
//!
//! A neuron that spiked at `t-1` loses its carried-over potential, so only
//! the fresh input current survives. The surrogate derivative used in place
//! of `dx/du` during backpropagation is a box of height `1/a` centred on the
//! threshold.

use crate::error::{contract, Result};
use crate::network::{NetworkSpec, SurrogateWindow};

/// Membrane update for a single neuron.
#[inline]
pub fn membrane(tau: f64, u_prev: f64, x_prev: f64, current: f64) -> f64 {
    tau * u_prev * (1.0 - x_prev) + current
}

/// Heaviside spike with `u == v_th` firing.
#[inline]
pub fn fire(u: f64, v_th: f64) -> f64 {
    if u >= v_th {
        1.0
    } else {
        0.0
    }
}

/// `(1/a) * 1[|u - v_th| < a/2]`.
#[inline]
pub fn surrogate(u: f64, v_th: f64, width: f64) -> f64 {
    if (u - v_th).abs() < width / 2.0 {
        1.0 / width
    } else {
        0.0
    }
}

/// Surrogate with an explicit choice of edge handling.
#[inline]
pub fn surrogate_in(window: SurrogateWindow, u: f64, v_th: f64, width: f64) -> f64 {
    let d = (u - v_th).abs();
    let inside = match window {
        SurrogateWindow::Open => d < width / 2.0,
        SurrogateWindow::Closed => d <= width / 2.0,
    };
    if inside {
        1.0 / width
    } else {
        0.0
    }
}

/// Advances a layer of LIF neurons by one time step. The bias must already
/// be folded into `input_current`.
pub fn lif_step(
    u_prev: &[f64],
    x_prev: &[f64],
    input_current: &[f64],
    spec: &NetworkSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if u_prev.len() != x_prev.len() || u_prev.len() != input_current.len() {
        return Err(contract(format!(
            "lif_step shapes disagree: u_prev {}, x_prev {}, input {}",
            u_prev.len(),
            x_prev.len(),
            input_current.len()
        )));
    }
    if let Some(bad) = x_prev.iter().find(|&&x| x != 0.0 && x != 1.0) {
        return Err(contract(format!("x_prev holds non-binary spike value {bad}")));
    }
    let u: Vec<f64> = u_prev
        .iter()
        .zip(x_prev)
        .zip(input_current)
        .map(|((&u, &x), &i)| membrane(spec.tau, u, x, i))
        .collect();
    let x = u.iter().map(|&v| fire(v, spec.v_th)).collect();
    Ok((u, x))
}

/// Elementwise surrogate derivative `dx/du` for a potential map.
pub fn spike_surrogate_grad(u: &[f64], spec: &NetworkSpec) -> Vec<f64> {
    u.iter()
        .map(|&v| surrogate_in(spec.surrogate_window, v, spec.v_th, spec.surrogate_width))
        .collect()
}
