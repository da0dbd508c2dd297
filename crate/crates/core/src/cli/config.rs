//! Line-oriented `key = value` run configuration with `#` comments.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::data::SyntheticKind;
use crate::error::{Error, Result};
use crate::network::{parse_architecture, Mode};
use crate::training::{OptimizerConfig, OptimizerKind, ScalarRule, ScheduleKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Synthetic(SyntheticKind),
    /// IDX files in `data_dir`.
    Mnist,
    /// CIFAR-10 binary batches in `data_dir`.
    Cifar10,
}

impl DatasetKind {
    pub fn sample_shape(&self) -> Vec<usize> {
        match self {
            DatasetKind::Synthetic(_) => vec![2],
            DatasetKind::Mnist => vec![1, 28, 28],
            DatasetKind::Cifar10 => vec![3, 32, 32],
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetKind::Synthetic(k) => write!(f, "{k}"),
            DatasetKind::Mnist => f.write_str("mnist"),
            DatasetKind::Cifar10 => f.write_str("cifar10"),
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" => Ok(DatasetKind::Cifar10),
            other => other
                .parse::<SyntheticKind>()
                .map(DatasetKind::Synthetic)
                .map_err(|_| Error::Invalid(format!("unknown dataset {s:?}; expected blobs, spirals, mnist or cifar10"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubsetRule {
    First,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub data_dir: Option<PathBuf>,
    /// Synthetic sample count, before the train/test split.
    pub samples: usize,
    pub classes: usize,
    pub noise: f64,
    pub test_fraction: f64,
    pub data_seed: u64,
    pub train_subset: Option<usize>,
    pub test_subset: Option<usize>,
    pub subset: SubsetRule,
}

impl DatasetSpec {
    pub fn classes(&self) -> usize {
        match self.kind {
            DatasetKind::Synthetic(_) => self.classes,
            _ => 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub arch: String,
    pub dataset: DatasetSpec,
    pub k: usize,
    pub a_init: f64,
    pub b_init: f64,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: String,
    pub lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: ScheduleKind,
    pub scalar_lr_mult: f64,
    pub scalar_optimizer: ScalarRule,
    pub precision: Precision,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Defaults for everything except the three required keys.
    pub fn new(mode: Mode, arch: &str, dataset: DatasetKind) -> Self {
        Self {
            mode,
            arch: arch.to_string(),
            dataset: DatasetSpec {
                kind: dataset,
                data_dir: None,
                samples: 2000,
                classes: 2,
                noise: 0.05,
                test_fraction: 0.2,
                data_seed: 0,
                train_subset: None,
                test_subset: None,
                subset: SubsetRule::First,
            },
            k: 4,
            a_init: 0.5,
            b_init: 0.5,
            seed: 0,
            epochs: 20,
            batch_size: 64,
            optimizer: "adamw".into(),
            lr: 0.01,
            weight_decay: 1e-4,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule: ScheduleKind::Cosine,
            scalar_lr_mult: 1.0,
            scalar_optimizer: ScalarRule::Same,
            precision: Precision::F32,
            output_dir: PathBuf::from("runs"),
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let kind = if self.optimizer == "sgd" {
            OptimizerKind::Sgd { momentum: self.momentum }
        } else {
            OptimizerKind::AdamW {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            }
        };
        OptimizerConfig {
            kind,
            lr: self.lr,
            weight_decay: self.weight_decay,
            scalar_lr_mult: self.scalar_lr_mult,
            scalar_rule: self.scalar_optimizer,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            optimizer: self.optimizer_config(),
            schedule: self.schedule,
        }
    }

    /// Applies one `key = value` setting. `line` is used in error messages.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let bad = |what: &str| Error::Config {
            line,
            message: format!("{key} = {value:?}: {what}"),
        };
        fn num<T: FromStr>(value: &str) -> Option<T> {
            value.parse().ok()
        }
        let real = || num::<f64>(value).filter(|v| v.is_finite()).ok_or_else(|| bad("expected a finite number"));
        let count = || num::<usize>(value).ok_or_else(|| bad("expected a non-negative integer"));
        let d = &mut self.dataset;
        match key {
            "mode" => {
                self.mode = match value {
                    "e2e" => Mode::EndToEnd,
                    "replacement" => Mode::Replacement,
                    _ => return Err(bad("expected e2e or replacement")),
                }
            }
            "arch" => self.arch = value.to_string(),
            "dataset" => d.kind = value.parse().map_err(|e: Error| bad(&e.to_string()))?,
            "data_dir" => d.data_dir = Some(PathBuf::from(value)),
            "samples" => d.samples = count()?,
            "classes" => d.classes = count()?,
            "noise" => d.noise = real()?,
            "test_fraction" => d.test_fraction = real()?,
            "data_seed" => d.data_seed = num(value).ok_or_else(|| bad("expected an unsigned integer"))?,
            "train_subset" => d.train_subset = Some(count()?),
            "test_subset" => d.test_subset = Some(count()?),
            "subset" => {
                d.subset = match value {
                    "first" => SubsetRule::First,
                    "balanced" => SubsetRule::Balanced,
                    _ => return Err(bad("expected first or balanced")),
                }
            }
            "k" => self.k = count()?,
            "a_init" => self.a_init = real()?,
            "b_init" => self.b_init = real()?,
            "seed" => self.seed = num(value).ok_or_else(|| bad("expected an unsigned integer"))?,
            "epochs" => self.epochs = count()?,
            "batch_size" => self.batch_size = count()?,
            "optimizer" => match value {
                "adamw" | "sgd" => self.optimizer = value.to_string(),
                _ => return Err(bad("expected adamw or sgd")),
            },
            "lr" => self.lr = real()?,
            "weight_decay" => self.weight_decay = real()?,
            "momentum" => self.momentum = real()?,
            "beta1" => self.beta1 = real()?,
            "beta2" => self.beta2 = real()?,
            "eps" => self.eps = real()?,
            "schedule" => {
                self.schedule = match value {
                    "cosine" => ScheduleKind::Cosine,
                    "constant" => ScheduleKind::Constant,
                    _ => return Err(bad("expected cosine or constant")),
                }
            }
            "scalar_lr_mult" => self.scalar_lr_mult = real()?,
            "scalar_optimizer" => {
                self.scalar_optimizer = match value {
                    "same" => ScalarRule::Same,
                    "sgd" => ScalarRule::Sgd,
                    _ => return Err(bad("expected same or sgd")),
                }
            }
            "precision" => {
                self.precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(bad("expected f32 or f64")),
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            _ => {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    /// Checks every field; `lines` maps keys to the line that set them.
    fn validate(&self, line_of: &dyn Fn(&str) -> usize) -> Result<()> {
        let fail = |key: &str, message: String| Error::Config {
            line: line_of(key),
            message,
        };
        if self.mode == Mode::Replacement && self.k < 2 {
            let key = if line_of("k") > 0 { "k" } else { "mode" };
            return Err(fail(key, Error::InvalidInterval(self.k).to_string()));
        }
        let positive = [("lr", self.lr), ("eps", self.eps)];
        for (key, v) in positive {
            if v <= 0.0 {
                return Err(fail(key, format!("{key} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("weight_decay", self.weight_decay),
            ("noise", self.dataset.noise),
            ("scalar_lr_mult", self.scalar_lr_mult),
        ];
        for (key, v) in non_negative {
            if v < 0.0 {
                return Err(fail(key, format!("{key} must be >= 0, got {v}")));
            }
        }
        for (key, v) in [("momentum", self.momentum), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(fail(key, format!("{key} must lie in [0, 1), got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(fail("batch_size", "batch_size must be positive".into()));
        }
        let d = &self.dataset;
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return Err(fail("test_fraction", format!("test_fraction must lie in (0, 1), got {}", d.test_fraction)));
        }
        if let DatasetKind::Synthetic(_) = d.kind {
            if d.classes < 2 || d.samples < 2 * d.classes {
                return Err(fail("samples", format!("need classes >= 2 and samples >= 2*classes, got {} and {}", d.classes, d.samples)));
            }
        } else if d.data_dir.is_none() {
            return Err(fail("dataset", format!("dataset {} needs data_dir", d.kind)));
        }
        parse_architecture(&self.arch, &d.kind.sample_shape(), d.classes())
            .map_err(|e| fail("arch", e.to_string()))?;
        Ok(())
    }

    /// Every key, one per line, in a form [`parse_config`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let mut lines = vec![
            format!("mode = {}", self.mode),
            format!("arch = {}", self.arch),
            format!("dataset = {}", d.kind),
        ];
        if let Some(dir) = &d.data_dir {
            lines.push(format!("data_dir = {}", dir.display()));
        }
        lines.extend([
            format!("samples = {}", d.samples),
            format!("classes = {}", d.classes),
            format!("noise = {}", d.noise),
            format!("test_fraction = {}", d.test_fraction),
            format!("data_seed = {}", d.data_seed),
        ]);
        if let Some(n) = d.train_subset {
            lines.push(format!("train_subset = {n}"));
        }
        if let Some(n) = d.test_subset {
            lines.push(format!("test_subset = {n}"));
        }
        lines.extend([
            format!("subset = {}", if d.subset == SubsetRule::First { "first" } else { "balanced" }),
            format!("k = {}", self.k),
            format!("a_init = {}", self.a_init),
            format!("b_init = {}", self.b_init),
            format!("seed = {}", self.seed),
            format!("epochs = {}", self.epochs),
            format!("batch_size = {}", self.batch_size),
            format!("optimizer = {}", self.optimizer),
            format!("lr = {}", self.lr),
            format!("weight_decay = {}", self.weight_decay),
            format!("momentum = {}", self.momentum),
            format!("beta1 = {}", self.beta1),
            format!("beta2 = {}", self.beta2),
            format!("eps = {}", self.eps),
            format!("schedule = {}", self.schedule),
            format!("scalar_lr_mult = {}", self.scalar_lr_mult),
            format!(
                "scalar_optimizer = {}",
                if self.scalar_optimizer == ScalarRule::Same { "same" } else { "sgd" }
            ),
            format!("precision = {}", if self.precision == Precision::F32 { "f32" } else { "f64" }),
            format!("output_dir = {}", self.output_dir.display()),
        ]);
        lines.join("\n") + "\n"
    }
}

/// Parses and validates a config. `overrides` are applied after the text, as
/// if appended to it.
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: n + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        entries.push((n + 1, key.trim().to_string(), value.trim().to_string()));
    }
    let after = text.lines().count();
    entries.extend(overrides.iter().enumerate().map(|(j, (k, v))| (after + j + 1, k.clone(), v.clone())));

    let mut seen: Vec<(String, usize)> = Vec::new();
    let mut cfg = RunConfig::new(Mode::EndToEnd, "", DatasetKind::Synthetic(SyntheticKind::Blobs));
    for (line, key, value) in &entries {
        cfg.set(key, value, *line)?;
        seen.retain(|(k, _)| k != key);
        seen.push((key.clone(), *line));
    }
    let line_of = |key: &str| seen.iter().find(|(k, _)| k == key).map_or(0, |(_, l)| *l);
    for key in ["mode", "dataset", "arch"] {
        if line_of(key) == 0 {
            return Err(Error::Config {
                line: 0,
                message: format!("missing required key {key:?}"),
            });
        }
    }
    cfg.validate(&line_of)?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}
