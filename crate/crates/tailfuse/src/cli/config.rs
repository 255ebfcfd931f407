//! Layered experiment configuration: built-in defaults, then a plain
//! key-value config file, then the output-directory environment
//! variable, then explicit command-line flags. Later layers win.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DatasetConfig;
use crate::error::{Error, Result};
use crate::loss::GammaSchedule;

/// Environment variable that overrides the default output directory
/// (explicit `--output-dir` flags still win).
pub const OUTPUT_DIR_ENV: &str = "TAILFUSE_OUTPUT_DIR";

/// Which training objective to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Focal,
}

impl LossKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Focal => "focal",
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" => Ok(LossKind::Ce),
            "focal" => Ok(LossKind::Focal),
            other => Err(Error::Config(format!(
                "loss must be `ce` or `focal`, got `{other}`"
            ))),
        }
    }
}

/// Full experiment configuration; field names map one-to-one onto the
/// kebab-case CLI flags and config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    // dataset
    pub k: usize,
    pub n_head: usize,
    pub imbalance_ratio: f64,
    pub d_a: usize,
    pub d_b: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub noise_sigma: f64,
    pub confusion_rate: f64,
    // training
    pub loss: LossKind,
    pub gamma_start: f64,
    pub gamma_end: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden_dim: usize,
    pub clip_len: usize,
    pub seed: u64,
    pub merge_val_into_train: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 12,
            n_head: 200,
            imbalance_ratio: 50.0,
            d_a: 16,
            d_b: 16,
            len_min: 8,
            len_max: 48,
            noise_sigma: 1.0,
            confusion_rate: 0.3,
            loss: LossKind::Focal,
            gamma_start: 2.0,
            gamma_end: 0.1,
            epochs: 20,
            batch_size: 32,
            lr: 3e-4,
            weight_decay: 0.05,
            hidden_dim: 64,
            clip_len: 16,
            seed: 42,
            merge_val_into_train: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            k: self.k,
            n_head: self.n_head,
            imbalance_ratio: self.imbalance_ratio,
            d_a: self.d_a,
            d_b: self.d_b,
            len_min: self.len_min,
            len_max: self.len_max,
            noise_sigma: self.noise_sigma,
            confusion_rate: self.confusion_rate,
            seed: self.seed,
        }
    }

    /// The annealing schedule spanning this run's epochs.
    pub fn schedule(&self) -> Result<GammaSchedule> {
        GammaSchedule::new(self.gamma_start, self.gamma_end, self.epochs)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_config().validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch-size must be at least 1".to_string()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config(format!(
                "lr must be nonnegative, got {}",
                self.lr
            )));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight-decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden-dim must be at least 1".to_string()));
        }
        if self.clip_len == 0 {
            return Err(Error::Config("clip-len must be at least 1".to_string()));
        }
        self.schedule()?;
        Ok(())
    }

    /// Applies the layering: config file (if given), then the output-dir
    /// environment variable, then explicit flag values.
    pub fn resolve(config_file: Option<&Path>, flags: &PartialConfig) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = config_file {
            parse_config_file(path)?.apply(&mut cfg);
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.output_dir = PathBuf::from(dir);
            }
        }
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A partially specified configuration: `None` means "not set here".
/// Doubles as the clap flag set and as the parsed config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct PartialConfig {
    /// Number of classes.
    #[arg(long)]
    pub k: Option<usize>,
    /// Training samples for the most frequent class.
    #[arg(long)]
    pub n_head: Option<usize>,
    /// Head-to-tail training count ratio.
    #[arg(long)]
    pub imbalance_ratio: Option<f64>,
    /// Feature width of modality A.
    #[arg(long)]
    pub d_a: Option<usize>,
    /// Feature width of modality B.
    #[arg(long)]
    pub d_b: Option<usize>,
    /// Minimum sequence length.
    #[arg(long)]
    pub len_min: Option<usize>,
    /// Maximum sequence length.
    #[arg(long)]
    pub len_max: Option<usize>,
    /// Per-frame noise scale of the generator.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Probability that one modality of a sample is confusable.
    #[arg(long)]
    pub confusion_rate: Option<f64>,
    /// Training objective.
    #[arg(long, value_enum)]
    pub loss: Option<LossKind>,
    /// Focusing parameter at the first epoch.
    #[arg(long)]
    pub gamma_start: Option<f64>,
    /// Focusing parameter at the last epoch.
    #[arg(long)]
    pub gamma_end: Option<f64>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// AdamW learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// AdamW decoupled weight decay.
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Hidden width of the classifier head.
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Frames per clip.
    #[arg(long)]
    pub clip_len: Option<usize>,
    /// Seed for generation, initialization, shuffling, and clip starts.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fold the validation split into the train split.
    #[arg(long)]
    pub merge_val_into_train: Option<bool>,
    /// Where command outputs are written.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl PartialConfig {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
        }
        set!(k);
        set!(n_head);
        set!(imbalance_ratio);
        set!(d_a);
        set!(d_b);
        set!(len_min);
        set!(len_max);
        set!(noise_sigma);
        set!(confusion_rate);
        set!(loss);
        set!(gamma_start);
        set!(gamma_end);
        set!(epochs);
        set!(batch_size);
        set!(lr);
        set!(weight_decay);
        set!(hidden_dim);
        set!(clip_len);
        set!(seed);
        set!(merge_val_into_train);
        set!(output_dir);
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize, path: &Path) -> Result<T> {
    value.parse().map_err(|_| Error::Record {
        path: path.display().to_string(),
        line,
        msg: format!("invalid value `{value}` for key `{key}`"),
    })
}

/// Parses a plain-text config file: one `key = value` per line, keys in
/// kebab-case matching the CLI flags, `#` comments and blank lines
/// ignored.
pub fn parse_config_file(path: &Path) -> Result<PartialConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut out = PartialConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or_else(|| Error::Record {
            path: path.display().to_string(),
            line,
            msg: format!("expected `key = value`, got `{raw}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "k" => out.k = Some(parse_value(key, value, line, path)?),
            "n-head" => out.n_head = Some(parse_value(key, value, line, path)?),
            "imbalance-ratio" => out.imbalance_ratio = Some(parse_value(key, value, line, path)?),
            "d-a" => out.d_a = Some(parse_value(key, value, line, path)?),
            "d-b" => out.d_b = Some(parse_value(key, value, line, path)?),
            "len-min" => out.len_min = Some(parse_value(key, value, line, path)?),
            "len-max" => out.len_max = Some(parse_value(key, value, line, path)?),
            "noise-sigma" => out.noise_sigma = Some(parse_value(key, value, line, path)?),
            "confusion-rate" => out.confusion_rate = Some(parse_value(key, value, line, path)?),
            "loss" => out.loss = Some(value.parse()?),
            "gamma-start" => out.gamma_start = Some(parse_value(key, value, line, path)?),
            "gamma-end" => out.gamma_end = Some(parse_value(key, value, line, path)?),
            "epochs" => out.epochs = Some(parse_value(key, value, line, path)?),
            "batch-size" => out.batch_size = Some(parse_value(key, value, line, path)?),
            "lr" => out.lr = Some(parse_value(key, value, line, path)?),
            "weight-decay" => out.weight_decay = Some(parse_value(key, value, line, path)?),
            "hidden-dim" => out.hidden_dim = Some(parse_value(key, value, line, path)?),
            "clip-len" => out.clip_len = Some(parse_value(key, value, line, path)?),
            "seed" => out.seed = Some(parse_value(key, value, line, path)?),
            "merge-val-into-train" => {
                out.merge_val_into_train = Some(parse_value(key, value, line, path)?)
            }
            "output-dir" => out.output_dir = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Record {
                    path: path.display().to_string(),
                    line,
                    msg: format!("unknown config key `{other}`"),
                })
            }
        }
    }
    Ok(out)
}
