//! Sweeps the streak threshold `t_num` (boundary updates and regeneration
//! together), like `sparse-snn sweep --param t_num --values 6,12,18,24`,
//! on a shortened desk profile. Each run writes into `runs/t_num_sweep`.

use sparse_snn::train::{run_sweep, ExperimentConfig};

fn main() -> sparse_snn::Result<()> {
    let mut cfg = ExperimentConfig::parse_str(include_str!("../../../configs/desk.conf"))?;
    cfg.set("train.epochs", &std::env::args().nth(1).unwrap_or_else(|| "30".into()))?;
    cfg.set("train.out", "runs/t_num_sweep")?;
    let values: Vec<String> = ["6", "12", "18", "24"].map(String::from).to_vec();
    for (v, s) in run_sweep(&cfg, "t_num", &values)? {
        println!("t_num={v:<3} {}", s.line());
    }
    Ok(())
}
