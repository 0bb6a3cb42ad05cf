//! The desk-scale profile end to end: synthetic 4-class corpus, reduced
//! conv network, 50 epochs in mode `full`, with metrics and a checkpoint in
//! `runs/desk`. Takes a few minutes on one core.
//!
//! `cargo run --release --example desk_training -- [epochs]`

use sparse_snn::train::{drive, ExperimentConfig, Trainer};

fn main() -> sparse_snn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut cfg = ExperimentConfig::parse_str(include_str!("../../../configs/desk.conf"))?;
    if let Some(e) = std::env::args().nth(1) {
        cfg.set("train.epochs", &e)?;
    }
    let out = cfg.out_dir.clone();
    let summary = drive(Trainer::new(cfg)?, &out)?;
    println!("{}", summary.line());
    println!("metrics in {}", out.join("metrics.csv").display());
    Ok(())
}
