//! Experiment driver: the per-epoch loop, evaluation, metrics files and
//! checkpoints.
//!
//! One epoch runs, in order:
//!
//! 1. shuffled minibatch training (forward, cross-entropy, BPTT, Adam);
//! 2. the boundary constraint, unless the mode is `baseline`;
//! 3. after the pruning start epoch, in pruning modes: importance scoring,
//!    pruning, the rate update, then (mode `full` only) regeneration and
//!    its rate update;
//! 4. test-set evaluation and one metrics row.
//!
//! All randomness comes from one ChaCha stream seeded by `train.seed` and
//! stored in the checkpoint, so a resumed run continues exactly where the
//! uninterrupted one would have been.

mod checkpoint;
mod config;
mod metrics;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{checkpoint_load, checkpoint_save, TrainingState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{DataSource, ExperimentConfig, Mode, CONFIG_KEYS};
pub use metrics::{emit_metrics, emit_timing, read_metrics, EpochMetrics, METRICS_HEADER};

use crate::constraint::{apply_constraint, init_boundaries};
use crate::data::{load_frames, load_idx, synthetic_corpus, Dataset, Split};
use crate::engine::{argmax, backward_pass, forward_pass, softmax_cross_entropy};
use crate::error::{io_err, Result, SnnError};
use crate::mask::StructureMask;
use crate::network::Network;
use crate::optim::Adam;
use crate::params::Parameters;
use crate::pruning::{compression_rate, neuron_importance, prunable_slots, prune_step, update_prune_rates};
use crate::regeneration::{regenerate_step, update_regen_rate, RegenState};

pub const IDX_TRAIN: (&str, &str) = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte");
pub const IDX_TEST: (&str, &str) = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
pub const FRAMES_TRAIN: &str = "train.snnf";
pub const FRAMES_TEST: &str = "test.snnf";

/// Seed offset between the synthetic train and test corpora.
const TEST_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

fn require(path: &Path) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(SnnError::Config(format!("missing data file {}", path.display())))
    }
}

/// Loads one split of a dataset directory, detecting IDX or frame files.
pub fn load_split(dir: &Path, split: Split) -> Result<Dataset> {
    let (idx, frames) = match split {
        Split::Train => (IDX_TRAIN, FRAMES_TRAIN),
        Split::Test => (IDX_TEST, FRAMES_TEST),
    };
    if dir.join(idx.0).is_file() {
        load_idx(&dir.join(idx.0), &require(&dir.join(idx.1))?, split)
    } else if dir.join(frames).is_file() {
        load_frames(&dir.join(frames), split)
    } else {
        Err(SnnError::Config(format!(
            "{} holds neither {} nor {frames}",
            dir.display(),
            idx.0
        )))
    }
}

/// Train and test splits named by the config.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match &cfg.data {
        DataSource::Synthetic { train, test, classes, shape, seed } => Ok((
            synthetic_corpus(*seed, *train, *shape, *classes, Split::Train)?,
            synthetic_corpus(seed.wrapping_add(TEST_SEED_OFFSET), *test, *shape, *classes, Split::Test)?,
        )),
        DataSource::Idx { dir } => {
            let train = load_idx(&require(&dir.join(IDX_TRAIN.0))?, &require(&dir.join(IDX_TRAIN.1))?, Split::Train)?;
            let test = load_idx(&require(&dir.join(IDX_TEST.0))?, &require(&dir.join(IDX_TEST.1))?, Split::Test)?;
            Ok((train, test))
        }
        DataSource::Frames { dir } => Ok((
            load_frames(&require(&dir.join(FRAMES_TRAIN))?, Split::Train)?,
            load_frames(&require(&dir.join(FRAMES_TEST))?, Split::Test)?,
        )),
    }
}

fn check_data(net: &Network, data: &Dataset) -> Result<()> {
    let spec = net.spec();
    if data.shape != spec.input_shape {
        return Err(SnnError::Config(format!(
            "{:?} data is {}, network expects {}",
            data.split, data.shape, spec.input_shape
        )));
    }
    if data.class_count > net.class_count() {
        return Err(SnnError::Config(format!(
            "{:?} data has {} classes, readout has {}",
            data.split,
            data.class_count,
            net.class_count()
        )));
    }
    if data.frames.is_some_and(|t| t != spec.time_steps) {
        return Err(SnnError::Config("frame count differs from the simulation window".into()));
    }
    Ok(())
}

/// Percentage of `labels` matched by the argmax of `logits`.
pub fn accuracy(logits: &[Vec<f64>], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = logits.iter().zip(labels).filter(|(z, &y)| argmax(z) == y).count();
    100.0 * correct as f64 / labels.len() as f64
}

/// Test accuracy of a (masked) model, in percent.
pub fn evaluate(
    net: &Network,
    params: &Parameters,
    mask: &StructureMask,
    data: &Dataset,
    batch_size: usize,
) -> Result<f64> {
    check_data(net, data)?;
    let t = net.spec().time_steps;
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut logits = Vec::with_capacity(data.len());
    for chunk in indices.chunks(batch_size.max(1)) {
        let (_, z) = forward_pass(net, params, mask, &data.batch(chunk, t)?)?;
        logits.extend(z);
    }
    Ok(accuracy(&logits, data.labels()))
}

/// In-memory training run.
pub struct Trainer {
    cfg: ExperimentConfig,
    net: Network,
    train: Dataset,
    test: Dataset,
    state: TrainingState,
}

impl Trainer {
    /// Validates `cfg`, loads the data and initializes a fresh run.
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let (train, test) = load_data(&cfg)?;
        Self::with_data(cfg, train, test)
    }

    /// Like [`Trainer::new`] with datasets supplied by the caller.
    pub fn with_data(cfg: ExperimentConfig, train: Dataset, test: Dataset) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.network_spec(train.shape, train.frames)?;
        let net = Network::new(spec.clone())?;
        check_data(&net, &train)?;
        check_data(&net, &test)?;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = Parameters::init(&net, &mut rng);
        let mask = StructureMask::all_alive(&net);
        let mut regen = RegenState::new(cfg.rho_g, cfg.gamma, cfg.regen_t_num(), &mask);
        regen.release_pruned = cfg.release_pruned;
        let state = TrainingState {
            config_text: cfg.to_text(),
            spec,
            epoch: 0,
            bounds: init_boundaries(&params),
            prev_weights: params.clone(),
            optimizer: Adam::new(cfg.adam, &params),
            params,
            mask,
            schedule: cfg.prune_schedule(),
            regen,
            rng,
            metrics: Vec::new(),
        };
        Ok(Self { cfg, net, train, test, state })
    }

    /// Continues a checkpointed run with the config stored inside it.
    pub fn resume(state: TrainingState) -> Result<Self> {
        let cfg = ExperimentConfig::parse_str(&state.config_text)?;
        let (train, test) = load_data(&cfg)?;
        Self::resume_with_data(state, train, test)
    }

    pub fn resume_with_data(state: TrainingState, train: Dataset, test: Dataset) -> Result<Self> {
        let cfg = ExperimentConfig::parse_str(&state.config_text)?;
        cfg.validate()?;
        let net = Network::new(state.spec.clone())?;
        check_data(&net, &train)?;
        check_data(&net, &test)?;
        state.params.check_layout(&net)?;
        state.mask.check_layout(&net)?;
        if state.metrics.len() != state.epoch {
            return Err(SnnError::Checkpoint("metrics history does not match epoch count".into()));
        }
        Ok(Self { cfg, net, train, test, state })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn state(&self) -> &TrainingState {
        &self.state
    }

    pub fn into_state(self) -> TrainingState {
        self.state
    }

    pub fn test_data(&self) -> &Dataset {
        &self.test
    }

    pub fn is_finished(&self) -> bool {
        self.state.epoch >= self.cfg.epochs
    }

    /// Rate shown for a layer kind: the one applied to its deepest prunable
    /// layer, or 0 when the network has no such layer.
    fn kind_rate(&self, conv: bool) -> f64 {
        prunable_slots(&self.net)
            .filter(|&s| self.net.layouts()[s].is_conv() == conv)
            .last()
            .map_or(0.0, |s| self.state.schedule.rate_for(&self.net, s))
    }

    /// Runs one epoch and returns its metrics row.
    pub fn run_epoch(&mut self) -> Result<&EpochMetrics> {
        let clock = Instant::now();
        let mode = self.cfg.mode;
        let epoch = self.state.epoch + 1;
        let start = self.state.schedule.start_epoch;
        let structural = epoch > start;
        let st = &mut self.state;
        let net = &self.net;
        let t = net.spec().time_steps;

        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut st.rng);
        let batches: Vec<&[usize]> = order.chunks(self.cfg.batch_size).collect();
        let collect_grads = mode.regenerates() && structural;
        let mut grad_stat = Parameters::zeros(net);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in &batches {
            let batch = self.train.batch(chunk, t)?;
            let labels: Vec<usize> = chunk.iter().map(|&i| self.train.label(i)).collect();
            let (states, logits) = forward_pass(net, &st.params, &st.mask, &batch)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(SnnError::NonFinite(format!("training loss at epoch {epoch}")));
            }
            loss_sum += loss * chunk.len() as f64;
            correct += logits.iter().zip(&labels).filter(|(z, &y)| argmax(z) == y).count();
            let grads = backward_pass(net, &states, &st.params, &st.mask, &dlogits)?;
            if collect_grads {
                grad_stat.accumulate_abs(&grads, 1.0 / batches.len() as f64);
            }
            st.optimizer.step(&mut st.params, &grads, &st.mask)?;
        }

        if mode.constrains() {
            apply_constraint(&mut st.params, &st.prev_weights, &mut st.bounds, &self.cfg.constraint)?;
        }
        let mut revived = 0;
        if mode.prunes() && structural {
            let importance: Vec<Vec<f64>> = (0..net.weighted_count())
                .map(|s| {
                    if s < net.output_slot() {
                        neuron_importance(&st.bounds, &st.mask, s)
                    } else {
                        vec![0.0; net.layouts()[s].units]
                    }
                })
                .collect();
            let report = prune_step(net, &importance, &mut st.mask, &st.schedule)?;
            st.params = st.params.masked(&st.mask);
            update_prune_rates(&mut st.schedule, net, epoch, &st.mask.retained_counts())?;
            if report.killed.iter().any(|&k| k > 0) {
                info!("epoch {epoch}: pruned units {:?}", report.killed);
            }
            if mode.regenerates() {
                let r = regenerate_step(&grad_stat, &mut st.mask, &mut st.regen, &mut st.params)?;
                update_regen_rate(&mut st.regen, epoch, start)?;
                revived = r.total_revived();
            }
        }
        if !st.params.is_finite() {
            return Err(SnnError::NonFinite(format!("parameters after epoch {epoch}")));
        }
        st.prev_weights = st.params.clone();

        let n = self.train.len().max(1) as f64;
        let test_acc = evaluate(net, &st.params, &st.mask, &self.test, self.cfg.batch_size)?;
        st.epoch = epoch;
        let row = EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_acc: 100.0 * correct as f64 / n,
            test_acc,
            compression: compression_rate(&st.mask),
            alive_units: st.mask.alive_counts(),
            pruned_units: st.mask.layers.iter().map(|l| l.unit_pruned.len() - l.retained_units()).collect(),
            rho_conv: 0.0,
            rho_fc: 0.0,
            rho_g: st.regen.rho_g,
            revived,
            wall_seconds: clock.elapsed().as_secs_f64(),
        };
        let row = EpochMetrics { rho_conv: self.kind_rate(true), rho_fc: self.kind_rate(false), ..row };
        info!(
            "epoch {epoch}: loss {:.4} train {:.2}% test {:.2}% compression {:.2}% revived {}",
            row.train_loss, row.train_acc, row.test_acc, row.compression, row.revived
        );
        self.state.metrics.push(row);
        Ok(self.state.metrics.last().expect("row just pushed"))
    }
}

/// Result of a finished run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub last: EpochMetrics,
}

impl RunSummary {
    /// `acc=<pct> compression=<pct>`.
    pub fn line(&self) -> String {
        format!("acc={:.2} compression={:.2}", self.last.test_acc, self.last.compression)
    }
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_FILE: &str = "config.txt";

/// Trains to completion, writing `config.txt`, `metrics.csv`, `timing.csv`
/// and `checkpoint.bin` into `out_dir` after every epoch. On an abort the
/// files from the last completed epoch stay in place.
pub fn drive(mut trainer: Trainer, out_dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let cfg_path = out_dir.join(CONFIG_FILE);
    fs::write(&cfg_path, &trainer.state.config_text).map_err(io_err(&cfg_path))?;
    while !trainer.is_finished() {
        if let Err(e) = trainer.run_epoch() {
            warn!("aborting at epoch {}: {e}", trainer.state.epoch + 1);
            return Err(e);
        }
        emit_metrics(&trainer.state.metrics, &out_dir.join(METRICS_FILE))?;
        emit_timing(&trainer.state.metrics, &out_dir.join(TIMING_FILE))?;
        checkpoint_save(&trainer.state, &out_dir.join(CHECKPOINT_FILE))?;
    }
    let last = trainer
        .state
        .metrics
        .last()
        .cloned()
        .ok_or_else(|| SnnError::Config("run has no completed epochs".into()))?;
    Ok(RunSummary { out_dir: out_dir.to_path_buf(), last })
}

/// Fresh run of `cfg` into `cfg.out_dir`.
pub fn run_training(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let trainer = Trainer::new(cfg.clone())?;
    drive(trainer, &cfg.out_dir)
}

/// One run per value of `key`, each in `<out>/<key>_<value>/`. Returns the
/// summaries in `values` order.
pub fn run_sweep(cfg: &ExperimentConfig, key: &str, values: &[String]) -> Result<Vec<(String, RunSummary)>> {
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        let mut c = cfg.clone();
        c.set(key, v)?;
        c.out_dir = cfg.out_dir.join(format!("{}_{v}", key.replace('.', "_")));
        info!("sweep {key}={v} -> {}", c.out_dir.display());
        out.push((v.clone(), run_training(&c)?));
    }
    Ok(out)
}
