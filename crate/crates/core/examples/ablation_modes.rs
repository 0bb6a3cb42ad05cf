//! Runs the four training modes on the same corpus and seed and prints a
//! comparison table. Defaults to a shortened 20-epoch desk profile; pass
//! an epoch count to change it.

use sparse_snn::train::{ExperimentConfig, Mode, Trainer};

fn main() -> sparse_snn::Result<()> {
    let epochs = std::env::args().nth(1).unwrap_or_else(|| "20".into());
    println!("mode             acc      compression  pruned units");
    for mode in [Mode::Baseline, Mode::ConstraintOnly, Mode::NoRegeneration, Mode::Full] {
        let mut cfg = ExperimentConfig::parse_str(include_str!("../../../configs/desk.conf"))?;
        cfg.set("train.epochs", &epochs)?;
        cfg.mode = mode;
        let mut trainer = Trainer::new(cfg)?;
        while !trainer.is_finished() {
            trainer.run_epoch()?;
        }
        let m = trainer.state().metrics.last().expect("epochs ran");
        println!("{:<16} {:<8.2} {:<12.2} {:?}", mode.as_str(), m.test_acc, m.compression, m.pruned_units);
    }
    Ok(())
}
