use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sparse_snn::data::Split;
use sparse_snn::pruning::compression_rate;
use sparse_snn::train::{checkpoint_load, drive, evaluate, load_split, run_sweep, ExperimentConfig, Mode, Trainer};
use sparse_snn::{Network, Result};

#[derive(Parser)]
#[command(version, about = "Train sparse spiking networks with pruning and regeneration")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat key = value config file; every key has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["full", "baseline", "constraint_only", "no_regeneration"])]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra overrides, `key=value`, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one model.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long, conflicts_with = "config")]
        resume: Option<PathBuf>,
    },
    /// Train once per value of one config key.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Config key; `t_num` moves both streak thresholds.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Accuracy of a checkpoint on the test split of a data directory.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn build_config(run: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &run.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &run.mode {
        cfg.mode = m.parse::<Mode>()?;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(o) = &run.out {
        cfg.out_dir = o.clone();
    }
    for kv in &run.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| sparse_snn::SnnError::Config(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train { run, resume } => {
            let (trainer, out) = match resume {
                Some(path) => {
                    let state = checkpoint_load(&path)?;
                    let trainer = Trainer::resume(state)?;
                    let out = run.out.clone().unwrap_or_else(|| trainer.config().out_dir.clone());
                    (trainer, out)
                }
                None => {
                    let cfg = build_config(&run)?;
                    let out = cfg.out_dir.clone();
                    (Trainer::new(cfg)?, out)
                }
            };
            let summary = drive(trainer, &out)?;
            println!("{}", summary.line());
        }
        Cmd::Sweep { run, param, values } => {
            let cfg = build_config(&run)?;
            for (v, s) in run_sweep(&cfg, &param, &values)? {
                println!("{param}={v} {} metrics={}", s.line(), s.out_dir.join("metrics.csv").display());
            }
        }
        Cmd::Eval { checkpoint, data } => {
            let state = checkpoint_load(&checkpoint)?;
            let net = Network::new(state.spec.clone())?;
            let test = load_split(&data, Split::Test)?;
            let acc = evaluate(&net, &state.params, &state.mask, &test, 256)?;
            println!("acc={acc:.2} compression={:.2}", compression_rate(&state.mask));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
