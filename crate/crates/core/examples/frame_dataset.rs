//! Pre-converted event data: builds a tiny multi-frame dataset, stores it in
//! the `.snnf` container and trains one epoch on it. The frame count must
//! equal the network's time steps.

use sparse_snn::data::{load_frames, write_frames, Dataset, Split};
use sparse_snn::train::{ExperimentConfig, Trainer};
use sparse_snn::Shape3;

/// A vertical bar moving left to right (class 0) or right to left (class 1).
fn moving_dots(n: usize, frames: usize, side: usize) -> Vec<f32> {
    let mut values = Vec::new();
    for i in 0..n {
        for t in 0..frames {
            let col = if i % 2 == 0 { t * (side - 1) / (frames - 1) } else { (frames - 1 - t) * (side - 1) / (frames - 1) };
            for _y in 0..side {
                for x in 0..side {
                    values.push(if x == col { 1.0 } else { 0.0 });
                }
            }
        }
    }
    values
}

fn main() -> sparse_snn::Result<()> {
    let (frames, side) = (4, 6);
    let shape = Shape3::new(1, side, side);
    let labels = |n: usize| (0..n).map(|i| i % 2).collect::<Vec<_>>();
    let train = Dataset::new(shape, Some(frames), 2, Split::Train, moving_dots(40, frames, side), labels(40))?;
    let test = Dataset::new(shape, Some(frames), 2, Split::Test, moving_dots(10, frames, side), labels(10))?;

    let path = std::env::temp_dir().join("sparse-snn-example.snnf");
    write_frames(&train, &path)?;
    let loaded = load_frames(&path, Split::Train)?;
    println!("{} samples, {frames} frames of {shape}, identical after reload: {}", loaded.len(), loaded == train);

    let mut cfg = ExperimentConfig::default();
    cfg.set("network.arch", "Input-4C3-AvgPool2-2FC")?;
    cfg.set("network.time_steps", &frames.to_string())?;
    cfg.set("train.epochs", "15")?;
    cfg.set("optim.lr", "0.01")?;
    cfg.set("train.batch_size", "8")?;
    let mut trainer = Trainer::with_data(cfg, loaded, test)?;
    while !trainer.is_finished() {
        let m = trainer.run_epoch()?;
        println!("epoch {}: loss {:.4} test {:.1}%", m.epoch, m.train_loss, m.test_acc);
    }
    Ok(())
}
