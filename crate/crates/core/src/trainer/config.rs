//! Flat `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Every key may appear at most once per file.
//! [`TrainConfig::to_text`] renders every key, and its output parses back to the same config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::augment::{AugPolicy, StrongOp};
use crate::data::{DatasetSource, SyntheticSpec};
use crate::error::{Result, SaaError};
use crate::select::{SelectionPolicy, DEFAULT_OTSU_BINS};

/// Numeric width used for parameters and losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = SaaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(SaaError::config(format!("precision `{s}` is not f32 or f64"))),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetKind {
    Synthetic,
    Cifar10(PathBuf),
    Mnist(PathBuf),
}

impl FromStr for DatasetKind {
    type Err = SaaError;

    /// `synthetic`, `cifar10:<dir>` or `mnist:<dir>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "synthetic" => Ok(DatasetKind::Synthetic),
            Some(("cifar10", dir)) if !dir.is_empty() => Ok(DatasetKind::Cifar10(dir.into())),
            Some(("mnist", dir)) if !dir.is_empty() => Ok(DatasetKind::Mnist(dir.into())),
            _ => Err(SaaError::config(format!(
                "dataset `{s}` is not `synthetic`, `cifar10:<dir>` or `mnist:<dir>`"
            ))),
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetKind::Synthetic => f.write_str("synthetic"),
            DatasetKind::Cifar10(d) => write!(f, "cifar10:{}", d.display()),
            DatasetKind::Mnist(d) => write!(f, "mnist:{}", d.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub name: String,
    pub seed: u64,
    pub precision: Precision,
    pub labeled_batch: usize,
    /// `|B_u| = unlabeled_ratio · |B_x|`.
    pub unlabeled_ratio: usize,
    pub lambda_u: f64,
    pub tau_c: f64,
    pub history_decay: f64,
    pub otsu_bins: usize,
    pub policy: SelectionPolicy,
    pub warmup_epochs: u64,
    pub epochs: u64,
    pub iters_per_epoch: u64,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub ema_decay: f64,
    pub dataset: DatasetKind,
    /// Generator settings, used when `dataset = synthetic`.
    pub synthetic: SyntheticSpec,
    /// Side length MNIST digits are padded or cropped to.
    pub mnist_side: usize,
    pub labels_per_class: usize,
    pub aug: AugPolicy,
    /// Save a checkpoint every this many epochs; 0 saves only the final one.
    pub checkpoint_every: u64,
    /// Write measured wall time into the metrics file. Off by default so that metrics
    /// files of identical runs are byte-identical; timings always go to `timing.csv`.
    pub record_wall_ms: bool,
    /// Worker threads for augmentation; 0 uses the runtime default.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            name: "run".into(),
            seed: 0,
            precision: Precision::F32,
            labeled_batch: 16,
            unlabeled_ratio: 7,
            lambda_u: 1.0,
            tau_c: 0.95,
            history_decay: 0.999,
            otsu_bins: DEFAULT_OTSU_BINS,
            policy: SelectionPolicy::Otsu,
            warmup_epochs: 12,
            epochs: 120,
            iters_per_epoch: 64,
            base_lr: 0.03,
            momentum: 0.9,
            weight_decay: 5e-4,
            ema_decay: 0.999,
            dataset: DatasetKind::Synthetic,
            synthetic: SyntheticSpec::default(),
            mnist_side: 32,
            labels_per_class: 4,
            aug: AugPolicy::default(),
            checkpoint_every: 10,
            record_wall_ms: false,
            threads: 0,
        }
    }
}

/// Keys written by [`TrainConfig::to_text`], in order.
pub const CONFIG_KEYS: &[&str] = &[
    "name",
    "seed",
    "precision",
    "labeled_batch",
    "unlabeled_ratio",
    "lambda_u",
    "tau_c",
    "history_decay",
    "otsu_bins",
    "policy",
    "warmup_epochs",
    "epochs",
    "iters_per_epoch",
    "base_lr",
    "momentum",
    "weight_decay",
    "ema_decay",
    "dataset",
    "dataset.seed",
    "dataset.classes",
    "dataset.train",
    "dataset.test",
    "dataset.side",
    "dataset.noise",
    "dataset.mnist_side",
    "labels_per_class",
    "aug.ops",
    "aug.n",
    "aug.cutout",
    "aug.cutout_fraction",
    "patchwise",
    "checkpoint_every",
    "record_wall_ms",
    "threads",
];

/// Accepted in files but not part of the configuration.
const INFO_KEYS: &[&str] = &["build_id"];

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| SaaError::config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(SaaError::config(format!("`{key}`: `{value}` is not a boolean"))),
    }
}

fn parse_ops(value: &str) -> Result<Vec<StrongOp>> {
    if value == "all" {
        return Ok(StrongOp::ALL.to_vec());
    }
    value.split(',').map(|s| s.trim().parse()).collect()
}

impl TrainConfig {
    /// Parses a config file body. Unset keys keep their defaults.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SaaError::config_at(line_no, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
                return Err(SaaError::config_at(line_no, format!("`{key}` already set at line {first}")));
            }
            seen.push((key.to_string(), line_no));
            cfg.set(key, value).map_err(|e| match e {
                SaaError::Config { message, .. } => SaaError::config_at(line_no, message),
                other => other,
            })?;
        }
        cfg.validate().map_err(|e| match e {
            SaaError::Config { line: None, message } => {
                let line = CONFIG_KEYS
                    .iter()
                    .filter(|k| message.contains(&format!("`{k}`")))
                    .find_map(|k| seen.iter().find(|(s, _)| s == k).map(|(_, l)| *l));
                SaaError::Config { line, message }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SaaError::io(path, e))?;
        Self::parse_text(&text)
    }

    /// Sets one key. Values are checked individually; cross-field rules are in [`TrainConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "name" => {
                if value.is_empty() || value.contains(['/', '\\']) {
                    return Err(SaaError::config(format!("`name`: `{value}` must be a non-empty plain name")));
                }
                self.name = value.to_string();
            }
            "seed" => self.seed = parse(key, value)?,
            "precision" => self.precision = value.parse()?,
            "labeled_batch" => self.labeled_batch = parse(key, value)?,
            "unlabeled_ratio" => self.unlabeled_ratio = parse(key, value)?,
            "lambda_u" => self.lambda_u = parse(key, value)?,
            "tau_c" => self.tau_c = parse(key, value)?,
            "history_decay" => self.history_decay = parse(key, value)?,
            "otsu_bins" => self.otsu_bins = parse(key, value)?,
            "policy" => self.policy = value.parse()?,
            "warmup_epochs" => self.warmup_epochs = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "iters_per_epoch" => self.iters_per_epoch = parse(key, value)?,
            "base_lr" => self.base_lr = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "ema_decay" => self.ema_decay = parse(key, value)?,
            "dataset" => self.dataset = value.parse()?,
            "dataset.seed" => self.synthetic.seed = parse(key, value)?,
            "dataset.classes" => self.synthetic.classes = parse(key, value)?,
            "dataset.train" => self.synthetic.n_train = parse(key, value)?,
            "dataset.test" => self.synthetic.n_test = parse(key, value)?,
            "dataset.side" => self.synthetic.side = parse(key, value)?,
            "dataset.noise" => self.synthetic.noise = parse(key, value)?,
            "dataset.mnist_side" => self.mnist_side = parse(key, value)?,
            "labels_per_class" => self.labels_per_class = parse(key, value)?,
            "aug.ops" => self.aug.ops = parse_ops(value)?,
            "aug.n" => self.aug.n_ops = parse(key, value)?,
            "aug.cutout" => self.aug.cutout = parse_bool(key, value)?,
            "aug.cutout_fraction" => self.aug.cutout_fraction = parse(key, value)?,
            "patchwise" => self.aug.patchwise = parse_bool(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            "record_wall_ms" => self.record_wall_ms = parse_bool(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            k if INFO_KEYS.contains(&k) => {}
            _ => return Err(SaaError::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SaaError::config(msg));
        if self.labeled_batch == 0 {
            return fail("`labeled_batch` must be positive".into());
        }
        if self.unlabeled_ratio == 0 {
            return fail("`unlabeled_ratio` must be at least 1".into());
        }
        if !(self.lambda_u >= 0.0 && self.lambda_u.is_finite()) {
            return fail(format!("`lambda_u` {} must be finite and ≥ 0", self.lambda_u));
        }
        if !(0.0..=1.0).contains(&self.tau_c) {
            return fail(format!("`tau_c` {} outside [0, 1]", self.tau_c));
        }
        for (key, v) in [("history_decay", self.history_decay), ("ema_decay", self.ema_decay), ("momentum", self.momentum)] {
            if !(0.0..1.0).contains(&v) {
                return fail(format!("`{key}` {v} outside [0, 1)"));
            }
        }
        if self.otsu_bins < 2 {
            return fail(format!("`otsu_bins` {} must be at least 2", self.otsu_bins));
        }
        self.policy.validate()?;
        if self.epochs == 0 || self.iters_per_epoch == 0 {
            return fail("`epochs` and `iters_per_epoch` must be positive".into());
        }
        if self.warmup_epochs > self.epochs {
            return fail(format!("`warmup_epochs` {} exceeds `epochs` {}", self.warmup_epochs, self.epochs));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return fail(format!("`base_lr` {} must be positive", self.base_lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("`weight_decay` {} must be finite and ≥ 0", self.weight_decay));
        }
        if self.labels_per_class == 0 {
            return fail("`labels_per_class` must be positive".into());
        }
        if self.dataset == DatasetKind::Synthetic {
            self.synthetic.validate()?;
        }
        if self.mnist_side < 4 || self.mnist_side % 4 != 0 {
            return fail(format!("`dataset.mnist_side` {} must be a positive multiple of 4", self.mnist_side));
        }
        self.aug.validate()
    }

    pub fn unlabeled_batch(&self) -> usize {
        self.labeled_batch * self.unlabeled_ratio
    }

    pub fn total_iterations(&self) -> u64 {
        self.epochs * self.iters_per_epoch
    }

    pub fn dataset_source(&self) -> DatasetSource {
        match &self.dataset {
            DatasetKind::Synthetic => DatasetSource::Synthetic(self.synthetic.clone()),
            DatasetKind::Cifar10(dir) => DatasetSource::Cifar10(dir.clone()),
            DatasetKind::Mnist(dir) => DatasetSource::Mnist { dir: dir.clone(), side: self.mnist_side },
        }
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "name" => self.name.clone(),
            "seed" => self.seed.to_string(),
            "precision" => self.precision.to_string(),
            "labeled_batch" => self.labeled_batch.to_string(),
            "unlabeled_ratio" => self.unlabeled_ratio.to_string(),
            "lambda_u" => self.lambda_u.to_string(),
            "tau_c" => self.tau_c.to_string(),
            "history_decay" => self.history_decay.to_string(),
            "otsu_bins" => self.otsu_bins.to_string(),
            "policy" => self.policy.to_string(),
            "warmup_epochs" => self.warmup_epochs.to_string(),
            "epochs" => self.epochs.to_string(),
            "iters_per_epoch" => self.iters_per_epoch.to_string(),
            "base_lr" => self.base_lr.to_string(),
            "momentum" => self.momentum.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "ema_decay" => self.ema_decay.to_string(),
            "dataset" => self.dataset.to_string(),
            "dataset.seed" => self.synthetic.seed.to_string(),
            "dataset.classes" => self.synthetic.classes.to_string(),
            "dataset.train" => self.synthetic.n_train.to_string(),
            "dataset.test" => self.synthetic.n_test.to_string(),
            "dataset.side" => self.synthetic.side.to_string(),
            "dataset.noise" => self.synthetic.noise.to_string(),
            "dataset.mnist_side" => self.mnist_side.to_string(),
            "labels_per_class" => self.labels_per_class.to_string(),
            "aug.ops" => self.aug.ops.iter().map(|o| o.name()).collect::<Vec<_>>().join(","),
            "aug.n" => self.aug.n_ops.to_string(),
            "aug.cutout" => self.aug.cutout.to_string(),
            "aug.cutout_fraction" => self.aug.cutout_fraction.to_string(),
            "patchwise" => self.aug.patchwise.to_string(),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            "record_wall_ms" => self.record_wall_ms.to_string(),
            "threads" => self.threads.to_string(),
            _ => unreachable!("key list and renderer disagree on `{key}`"),
        }
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            writeln!(out, "{key} = {}", self.value_of(key)).expect("writing to a String");
        }
        out
    }

    /// Stable fingerprint of everything that influences the metrics. Excludes the run
    /// name, checkpoint schedule, thread count and wall-time recording.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for key in CONFIG_KEYS {
            if matches!(*key, "name" | "checkpoint_every" | "threads" | "record_wall_ms") {
                continue;
            }
            for b in key.bytes().chain([b'=']).chain(self.value_of(key).bytes()).chain([b'\n']) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(TrainConfig::parse_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn non_default_round_trip() {
        let text = "seed = 9\npolicy = prop:0.25\ndataset = mnist:/tmp/m\naug.ops = rotate, solarize\n\
                    patchwise = true\nprecision = f64\nlambda_u = 0.5 # comment\n";
        let cfg = TrainConfig::parse_text(text).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.policy, SelectionPolicy::FixedProportion(0.25));
        assert_eq!(cfg.dataset, DatasetKind::Mnist("/tmp/m".into()));
        assert_eq!(cfg.aug.ops, vec![StrongOp::Rotate, StrongOp::Solarize]);
        assert!(cfg.aug.patchwise);
        assert_eq!(cfg.precision, Precision::F64);
        assert_eq!(TrainConfig::parse_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match TrainConfig::parse_text(text) {
            Err(SaaError::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(line_of("seed = 1\n\nbogus = 3\n"), Some(3));
        assert_eq!(line_of("# c\nseed = x\n"), Some(2));
        assert_eq!(line_of("seed 1\n"), Some(1));
        assert_eq!(line_of("seed = 1\nseed = 2\n"), Some(2));
        assert_eq!(line_of("policy = median\n"), Some(1));
        assert_eq!(line_of("epochs = 10\nwarmup_epochs = 20\n"), Some(2));
        assert_eq!(line_of("momentum = 1.5\n"), Some(1));
    }

    #[test]
    fn warmup_may_cover_whole_run() {
        TrainConfig::parse_text("epochs = 5\nwarmup_epochs = 5\n").unwrap();
    }

    #[test]
    fn build_id_is_accepted() {
        TrainConfig::parse_text("build_id = saa 0.1.0\n").unwrap();
    }

    #[test]
    fn fingerprint_ignores_schedule_only_keys() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        b.name = "other".into();
        b.threads = 3;
        b.checkpoint_every = 1;
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
