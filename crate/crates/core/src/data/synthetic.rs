//! Deterministic class-conditioned images for tests and desk-scale runs.
//!
//! Class `k` of `K` is a Gaussian blob centred on a ring around the image
//! centre at angle `2*pi*k/K`. Each sample jitters the centre by up to one
//! pixel, draws its own amplitude and adds uniform background noise. Values
//! are quantized to multiples of `1/255` so the corpus survives an IDX round
//! trip unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Split};
use crate::error::{contract, Result};
use crate::network::Shape3;

fn quantize(v: f64) -> f32 {
    ((v.clamp(0.0, 1.0) * 255.0).round() / 255.0) as f32
}

/// `n` samples with labels `i % class_count`, same output for the same seed.
pub fn synthetic_corpus(seed: u64, n: usize, shape: Shape3, class_count: usize, split: Split) -> Result<Dataset> {
    if class_count < 2 {
        return Err(contract("synthetic corpus needs at least two classes"));
    }
    if n < class_count {
        return Err(contract(format!("{n} samples cannot cover {class_count} classes")));
    }
    if shape.height < 4 || shape.width < 4 {
        return Err(contract(format!("synthetic images of {shape} are too small")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (shape.height as f64, shape.width as f64);
    let radius = 0.3 * h.min(w);
    let sigma = 0.12 * h.min(w);
    let mut values = Vec::with_capacity(n * shape.len());
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % class_count;
        let angle = std::f64::consts::TAU * label as f64 / class_count as f64;
        let cy = (h - 1.0) / 2.0 + radius * angle.sin() + rng.gen_range(-1.0..1.0);
        let cx = (w - 1.0) / 2.0 + radius * angle.cos() + rng.gen_range(-1.0..1.0);
        let amp = rng.gen_range(0.7..1.0);
        for c in 0..shape.channels {
            let gain = 1.0 - 0.2 * c as f64 / shape.channels as f64;
            for y in 0..shape.height {
                for x in 0..shape.width {
                    let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                    let blob = amp * gain * (-d2 / (2.0 * sigma * sigma)).exp();
                    values.push(quantize(blob + rng.gen_range(0.0..0.15)));
                }
            }
        }
        labels.push(label);
    }
    Dataset::new(shape, None, class_count, split, values, labels)
}
