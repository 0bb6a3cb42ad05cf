//! Stops a short run half way, saves a checkpoint, resumes it from disk and
//! compares the result with an uninterrupted run.

use sparse_snn::train::{checkpoint_load, checkpoint_save, ExperimentConfig, Trainer};

fn config() -> sparse_snn::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [
        ("network.arch", "Input-4C3-AvgPool2-20FC-3FC"),
        ("data.train_samples", "120"),
        ("data.test_samples", "30"),
        ("data.classes", "3"),
        ("data.shape", "1x8x8"),
        ("train.epochs", "8"),
        ("train.batch_size", "16"),
        ("t_num", "1"),
        ("optim.lr", "0.01"),
    ] {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn main() -> sparse_snn::Result<()> {
    let mut whole = Trainer::new(config()?)?;
    while !whole.is_finished() {
        whole.run_epoch()?;
    }

    let mut first = Trainer::new(config()?)?;
    for _ in 0..4 {
        first.run_epoch()?;
    }
    let path = std::env::temp_dir().join("sparse-snn-example.ckpt");
    checkpoint_save(first.state(), &path)?;
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!("saved epoch {} to {} ({size} bytes)", first.state().epoch, path.display());

    let mut resumed = Trainer::resume(checkpoint_load(&path)?)?;
    while !resumed.is_finished() {
        resumed.run_epoch()?;
    }
    let (a, b) = (whole.state(), resumed.state());
    println!("parameters identical: {}", a.params == b.params);
    println!("mask identical:       {}", a.mask == b.mask);
    for (x, y) in a.metrics.iter().zip(&b.metrics) {
        println!("epoch {}: loss {:.6} / {:.6}, compression {:.2} / {:.2}", x.epoch, x.train_loss, y.train_loss, x.compression, y.compression);
    }
    Ok(())
}
