//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Every key has a
//! default, so an empty file is a valid config. Unknown or repeated keys are
//! rejected. [`ExperimentConfig::set`] is the single entry point for both
//! file values and command-line overrides.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::constraint::ConstraintConfig;
use crate::error::{io_err, Result, SnnError};
use crate::network::{NetworkSpec, Shape3, SurrogateWindow};
use crate::optim::AdamConfig;
use crate::pruning::{PruneSchedule, RateMode};

/// Which structural mechanisms run during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    /// Plain surrogate-gradient training.
    Baseline,
    /// Boundary constraint only.
    ConstraintOnly,
    /// Constraint and pruning.
    NoRegeneration,
    /// Constraint, pruning and regeneration.
    #[default]
    Full,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Baseline, Mode::ConstraintOnly, Mode::NoRegeneration, Mode::Full];

    pub fn constrains(self) -> bool {
        self != Mode::Baseline
    }

    pub fn prunes(self) -> bool {
        matches!(self, Mode::NoRegeneration | Mode::Full)
    }

    pub fn regenerates(self) -> bool {
        self == Mode::Full
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::ConstraintOnly => "constraint_only",
            Mode::NoRegeneration => "no_regeneration",
            Mode::Full => "full",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = SnnError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| SnnError::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Seeded blob corpus, generated in memory.
    Synthetic { train: usize, test: usize, classes: usize, shape: Shape3, seed: u64 },
    /// Directory with `train-*` and `t10k-*` IDX pairs.
    Idx { dir: PathBuf },
    /// Directory with `train.snnf` and `test.snnf` frame containers.
    Frames { dir: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub arch: String,
    pub time_steps: usize,
    pub tau: f64,
    pub v_th: f64,
    pub surrogate_width: f64,
    pub surrogate_window: SurrogateWindow,
    pub data: DataSource,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: Mode,
    pub out_dir: PathBuf,
    pub adam: AdamConfig,
    pub constraint: ConstraintConfig,
    pub rho_conv: f64,
    pub rho_fc: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `None` scales with the epoch count.
    pub start_epoch: Option<usize>,
    pub mid_epoch: Option<usize>,
    pub rho_cap: f64,
    pub rate_mode: RateMode,
    pub rho_g: f64,
    pub gamma: f64,
    /// `None` shares the constraint's `t_num`.
    pub regen_t_num: Option<u32>,
    pub release_pruned: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let prune = PruneSchedule::default();
        Self {
            arch: "Input-15C3-AvgPool2-40C3-AvgPool2-Flatten-300FC-10FC".into(),
            time_steps: NetworkSpec::DEFAULT_TIME_STEPS,
            tau: NetworkSpec::DEFAULT_TAU,
            v_th: NetworkSpec::DEFAULT_V_TH,
            surrogate_width: NetworkSpec::DEFAULT_SURROGATE_WIDTH,
            surrogate_window: SurrogateWindow::Closed,
            data: DataSource::Synthetic { train: 2000, test: 500, classes: 4, shape: Shape3::new(1, 16, 16), seed: 1 },
            epochs: 150,
            batch_size: 64,
            seed: 0,
            mode: Mode::Full,
            out_dir: PathBuf::from("runs/default"),
            adam: AdamConfig::default(),
            constraint: ConstraintConfig::default(),
            rho_conv: prune.rho_conv,
            rho_fc: prune.rho_fc,
            alpha: prune.alpha,
            beta: prune.beta,
            start_epoch: None,
            mid_epoch: None,
            rho_cap: prune.rho_cap,
            rate_mode: RateMode::SharedPerKind,
            rho_g: 1.0,
            gamma: 1.1,
            regen_t_num: None,
            release_pruned: false,
        }
    }
}

/// Every accepted key with a one-line description, in output order.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("network.arch", "dash-separated layers, e.g. Input-8C3-AvgPool2-100FC-4FC"),
    ("network.time_steps", "simulation steps T"),
    ("network.tau", "membrane decay"),
    ("network.v_th", "firing threshold"),
    ("network.surrogate_width", "surrogate window width a"),
    ("network.surrogate_window", "closed | open: whether the window includes its edges"),
    ("data.source", "synthetic | idx | frames"),
    ("data.dir", "dataset directory for idx and frames"),
    ("data.train_samples", "synthetic training samples"),
    ("data.test_samples", "synthetic test samples"),
    ("data.classes", "synthetic class count"),
    ("data.shape", "synthetic image shape CxHxW"),
    ("data.seed", "synthetic corpus seed"),
    ("train.epochs", "number of epochs"),
    ("train.batch_size", "minibatch size"),
    ("train.seed", "seed for initialization and shuffling"),
    ("train.mode", "full | no_regeneration | constraint_only | baseline"),
    ("train.out", "output directory"),
    ("optim.lr", "Adam learning rate"),
    ("optim.beta1", "Adam first-moment decay"),
    ("optim.beta2", "Adam second-moment decay"),
    ("optim.eps", "Adam denominator epsilon"),
    ("constraint.t_num", "streak length that moves a boundary"),
    ("constraint.epsilon", "boundary contraction factor"),
    ("prune.rho_conv", "initial conv pruning rate, percent"),
    ("prune.rho_fc", "initial fc pruning rate, percent"),
    ("prune.alpha", "step size up to the mid epoch"),
    ("prune.beta", "step size after the mid epoch"),
    ("prune.start", "first epoch after which pruning runs (auto: 0.24 * epochs)"),
    ("prune.mid", "epoch where the step switches to beta (auto: 0.40 * epochs)"),
    ("prune.cap", "upper bound on pruning rates, percent"),
    ("prune.rate_mode", "shared | per_layer"),
    ("regen.rho_g", "initial regeneration rate, percent"),
    ("regen.gamma", "regeneration rate growth base"),
    ("regen.t_num", "hit streak length for revival (auto: constraint.t_num)"),
    ("regen.release_pruned", "let revived units be pruned again"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| SnnError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(SnnError::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn auto<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".into(), T::to_string)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SnnError::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(SnnError::Config(format!("line {}: duplicate key {key}", n + 1)));
            }
            cfg.set(key, value.trim())?;
        }
        Ok(cfg)
    }

    /// Sets one dotted key. `t_num` is accepted as shorthand for
    /// `constraint.t_num` and also clears any separate `regen.t_num`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "network.arch" => {
                NetworkSpec::parse_layers(value)?;
                self.arch = value.to_string();
            }
            "network.time_steps" => self.time_steps = parse(key, value)?,
            "network.tau" => self.tau = parse(key, value)?,
            "network.v_th" => self.v_th = parse(key, value)?,
            "network.surrogate_width" => self.surrogate_width = parse(key, value)?,
            "network.surrogate_window" => {
                self.surrogate_window = match value {
                    "open" => SurrogateWindow::Open,
                    "closed" => SurrogateWindow::Closed,
                    _ => return Err(SnnError::Config(format!("{key}: expected open or closed"))),
                }
            }
            "data.source" => self.set_source(value)?,
            "data.dir" => match &mut self.data {
                DataSource::Idx { dir } | DataSource::Frames { dir } => *dir = PathBuf::from(value),
                DataSource::Synthetic { .. } => {
                    return Err(SnnError::Config("data.dir needs data.source = idx or frames first".into()))
                }
            },
            "data.train_samples" | "data.test_samples" | "data.classes" | "data.shape" | "data.seed" => {
                let DataSource::Synthetic { train, test, classes, shape, seed } = &mut self.data else {
                    return Err(SnnError::Config(format!("{key} applies to synthetic data only")));
                };
                match key {
                    "data.train_samples" => *train = parse(key, value)?,
                    "data.test_samples" => *test = parse(key, value)?,
                    "data.classes" => *classes = parse(key, value)?,
                    "data.seed" => *seed = parse(key, value)?,
                    _ => *shape = Shape3::parse(value)?,
                }
            }
            "train.epochs" => self.epochs = parse(key, value)?,
            "train.batch_size" => self.batch_size = parse(key, value)?,
            "train.seed" => self.seed = parse(key, value)?,
            "train.mode" => self.mode = value.parse()?,
            "train.out" => self.out_dir = PathBuf::from(value),
            "optim.lr" => self.adam.lr = parse(key, value)?,
            "optim.beta1" => self.adam.beta1 = parse(key, value)?,
            "optim.beta2" => self.adam.beta2 = parse(key, value)?,
            "optim.eps" => self.adam.eps = parse(key, value)?,
            "constraint.t_num" => self.constraint.t_num = parse(key, value)?,
            "t_num" => {
                self.constraint.t_num = parse(key, value)?;
                self.regen_t_num = None;
            }
            "constraint.epsilon" => self.constraint.epsilon = parse(key, value)?,
            "prune.rho_conv" => self.rho_conv = parse(key, value)?,
            "prune.rho_fc" => self.rho_fc = parse(key, value)?,
            "prune.alpha" => self.alpha = parse(key, value)?,
            "prune.beta" => self.beta = parse(key, value)?,
            "prune.start" => self.start_epoch = parse_auto(key, value)?,
            "prune.mid" => self.mid_epoch = parse_auto(key, value)?,
            "prune.cap" => self.rho_cap = parse(key, value)?,
            "prune.rate_mode" => {
                self.rate_mode = match value {
                    "shared" => RateMode::SharedPerKind,
                    "per_layer" => RateMode::PerLayer,
                    _ => return Err(SnnError::Config(format!("{key}: expected shared or per_layer"))),
                }
            }
            "regen.rho_g" => self.rho_g = parse(key, value)?,
            "regen.gamma" => self.gamma = parse(key, value)?,
            "regen.t_num" => self.regen_t_num = parse_auto(key, value)?,
            "regen.release_pruned" => self.release_pruned = parse_bool(key, value)?,
            _ => return Err(SnnError::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    fn set_source(&mut self, value: &str) -> Result<()> {
        let keep_dir = match &self.data {
            DataSource::Idx { dir } | DataSource::Frames { dir } => dir.clone(),
            DataSource::Synthetic { .. } => PathBuf::new(),
        };
        self.data = match value {
            "synthetic" => match self.data {
                DataSource::Synthetic { .. } => return Ok(()),
                _ => Self::default().data,
            },
            "idx" => DataSource::Idx { dir: keep_dir },
            "frames" => DataSource::Frames { dir: keep_dir },
            _ => return Err(SnnError::Config(format!("unknown data.source {value:?}"))),
        };
        Ok(())
    }

    /// Pruning start epoch: explicit, or `round(0.24 * epochs)`.
    pub fn start_epoch(&self) -> usize {
        self.start_epoch.unwrap_or_else(|| (0.24 * self.epochs as f64).round() as usize)
    }

    /// Switch epoch of the step schedule: explicit, or `round(0.40 * epochs)`.
    pub fn mid_epoch(&self) -> usize {
        self.mid_epoch.unwrap_or_else(|| (0.40 * self.epochs as f64).round() as usize)
    }

    pub fn regen_t_num(&self) -> u32 {
        self.regen_t_num.unwrap_or(self.constraint.t_num)
    }

    pub fn network_spec(&self, input_shape: Shape3, frames: Option<usize>) -> Result<NetworkSpec> {
        let mut spec = NetworkSpec::new(input_shape, NetworkSpec::parse_layers(&self.arch)?);
        spec.time_steps = frames.unwrap_or(self.time_steps);
        spec.tau = self.tau;
        spec.v_th = self.v_th;
        spec.surrogate_width = self.surrogate_width;
        spec.surrogate_window = self.surrogate_window;
        Ok(spec)
    }

    pub fn prune_schedule(&self) -> PruneSchedule {
        PruneSchedule {
            rho_conv: self.rho_conv,
            rho_fc: self.rho_fc,
            alpha: self.alpha,
            beta: self.beta,
            start_epoch: self.start_epoch(),
            mid_epoch: self.mid_epoch(),
            rho_cap: self.rho_cap,
            rate_mode: self.rate_mode,
            layer_rates: Vec::new(),
        }
    }

    /// Checks everything that does not need the data on disk.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SnnError::Config(m));
        if self.epochs < 1 {
            return bad("train.epochs must be >= 1".into());
        }
        if self.batch_size < 1 {
            return bad("train.batch_size must be >= 1".into());
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return bad(format!("optim.lr {} must be positive", self.adam.lr));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) || self.adam.eps <= 0.0 {
            return bad("Adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.start_epoch() >= self.epochs && self.mode.prunes() {
            log::warn!("pruning starts after epoch {} of {}: it will never run", self.start_epoch(), self.epochs);
        }
        let wrap = |e: SnnError| SnnError::Config(e.to_string());
        self.constraint.validate().map_err(wrap)?;
        self.prune_schedule().validate().map_err(wrap)?;
        if !(0.0..=crate::regeneration::RHO_G_CAP).contains(&self.rho_g) {
            return bad(format!("regen.rho_g {} outside [0, 99]", self.rho_g));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad(format!("regen.gamma {} must exceed 1", self.gamma));
        }
        if self.regen_t_num() < 1 {
            return bad("regen.t_num must be >= 1".into());
        }
        if let DataSource::Synthetic { train, test, classes, .. } = self.data {
            if classes < 2 || train < classes || test < classes {
                return bad("synthetic data needs >= 2 classes and at least one sample per class".into());
            }
        }
        let spec = self.network_spec(Shape3::new(1, 1, 1), None)?;
        if spec.time_steps < 1 || !(spec.tau >= 0.0 && spec.tau < 1.0) || spec.v_th <= 0.0 || spec.surrogate_width <= 0.0 {
            return bad("LIF constants out of range".into());
        }
        Ok(())
    }

    /// The resolved config, one `key = value` per line, reloadable with
    /// [`ExperimentConfig::parse_str`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("network.arch", self.arch.clone());
        put("network.time_steps", self.time_steps.to_string());
        put("network.tau", self.tau.to_string());
        put("network.v_th", self.v_th.to_string());
        put("network.surrogate_width", self.surrogate_width.to_string());
        let window = match self.surrogate_window {
            SurrogateWindow::Open => "open",
            SurrogateWindow::Closed => "closed",
        };
        put("network.surrogate_window", window.into());
        match &self.data {
            DataSource::Synthetic { train, test, classes, shape, seed } => {
                put("data.source", "synthetic".into());
                put("data.train_samples", train.to_string());
                put("data.test_samples", test.to_string());
                put("data.classes", classes.to_string());
                put("data.shape", shape.to_string());
                put("data.seed", seed.to_string());
            }
            DataSource::Idx { dir } => {
                put("data.source", "idx".into());
                put("data.dir", dir.display().to_string());
            }
            DataSource::Frames { dir } => {
                put("data.source", "frames".into());
                put("data.dir", dir.display().to_string());
            }
        }
        put("train.epochs", self.epochs.to_string());
        put("train.batch_size", self.batch_size.to_string());
        put("train.seed", self.seed.to_string());
        put("train.mode", self.mode.to_string());
        put("train.out", self.out_dir.display().to_string());
        put("optim.lr", self.adam.lr.to_string());
        put("optim.beta1", self.adam.beta1.to_string());
        put("optim.beta2", self.adam.beta2.to_string());
        put("optim.eps", self.adam.eps.to_string());
        put("constraint.t_num", self.constraint.t_num.to_string());
        put("constraint.epsilon", self.constraint.epsilon.to_string());
        put("prune.rho_conv", self.rho_conv.to_string());
        put("prune.rho_fc", self.rho_fc.to_string());
        put("prune.alpha", self.alpha.to_string());
        put("prune.beta", self.beta.to_string());
        put("prune.start", auto(&self.start_epoch));
        put("prune.mid", auto(&self.mid_epoch));
        put("prune.cap", self.rho_cap.to_string());
        let rate_mode = match self.rate_mode {
            RateMode::SharedPerKind => "shared",
            RateMode::PerLayer => "per_layer",
        };
        put("prune.rate_mode", rate_mode.into());
        put("regen.rho_g", self.rho_g.to_string());
        put("regen.gamma", self.gamma.to_string());
        put("regen.t_num", auto(&self.regen_t_num));
        put("regen.release_pruned", self.release_pruned.to_string());
        out
    }
}
