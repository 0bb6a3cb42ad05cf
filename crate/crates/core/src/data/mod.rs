//! Datasets and input encoding.
//!
//! Static images are stored once per sample and replicated over the
//! simulation window when encoded (direct current injection). Pre-converted
//! neuromorphic recordings arrive as dense frame tensors that already carry
//! a time axis and are passed through unchanged.

mod frames;
mod idx;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use frames::{load_frames, write_frames, FRAME_MAGIC, FRAME_VERSION};
pub use idx::{load_idx, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use synthetic::synthetic_corpus;

use crate::engine::InputBatch;
use crate::error::{contract, Result};
use crate::network::Shape3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

/// Labelled samples sharing one shape. Values lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub shape: Shape3,
    /// `Some(T)` when every sample is a `T`-frame tensor.
    pub frames: Option<usize>,
    pub class_count: usize,
    pub split: Split,
    values: Vec<f32>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        shape: Shape3,
        frames: Option<usize>,
        class_count: usize,
        split: Split,
        values: Vec<f32>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let per = shape.len() * frames.unwrap_or(1);
        if values.len() != per * labels.len() {
            return Err(contract(format!(
                "{} values cannot hold {} samples of {per}",
                values.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(contract(format!("label {bad} outside {class_count} classes")));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(contract(format!("sample value {bad} outside [0, 1]")));
        }
        Ok(Self { shape, frames, class_count, split, values, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.shape.len() * self.frames.unwrap_or(1)
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let n = self.sample_len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Time-expanded input for sample `i`.
    pub fn encode(&self, i: usize, time_steps: usize) -> Result<Vec<f64>> {
        encode_input(self.sample(i), self.frames, time_steps)
    }

    /// Network input for the samples at `indices`.
    pub fn batch(&self, indices: &[usize], time_steps: usize) -> Result<InputBatch> {
        let mut data = Vec::with_capacity(indices.len() * time_steps * self.shape.len());
        for &i in indices {
            data.extend(self.encode(i, time_steps)?);
        }
        InputBatch::new(indices.len(), time_steps, self.shape, data)
    }
}

/// Expands one sample to `(T, C, H, W)`. A static sample is repeated at every
/// step; a frame tensor (`frames == Some(T)`) must already have `T` frames
/// and is copied through.
pub fn encode_input(sample: &[f32], frames: Option<usize>, time_steps: usize) -> Result<Vec<f64>> {
    if time_steps < 1 {
        return Err(contract("time_steps must be >= 1"));
    }
    match frames {
        None => {
            let mut out = Vec::with_capacity(sample.len() * time_steps);
            for _ in 0..time_steps {
                out.extend(sample.iter().map(|&v| f64::from(v)));
            }
            Ok(out)
        }
        Some(t) if t == time_steps => Ok(sample.iter().map(|&v| f64::from(v)).collect()),
        Some(t) => Err(contract(format!("frame tensor has {t} frames, network simulates {time_steps}"))),
    }
}
