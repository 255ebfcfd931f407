//! The four commands behind the binary: `gen`, `train`, `eval`, and
//! `gradcheck` (the last one lives in [`crate::cli::gradcheck`]).
//!
//! Every artifact is plain text: line-delimited JSON records for splits,
//! JSON documents for checkpoints, reports, and manifests, CSV for the
//! confusion matrix. Reruns with the same seeds produce byte-identical
//! datasets, checkpoints, and reports; manifests additionally record
//! wall-clock durations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cli::checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
use crate::cli::config::{ExperimentConfig, LossKind};
use crate::cli::train::{train_modality, EpochLog};
use crate::data::{class_counts, generate, read_dataset, write_dataset, Modality, Sample};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_models, evaluate_single, tail_slice, FusionMode, MetricsReport};

pub const DATASET_MANIFEST_FORMAT: &str = "tailfuse-dataset-v1";
pub const RUN_MANIFEST_FORMAT: &str = "tailfuse-run-v1";
pub const REPORT_FORMAT: &str = "tailfuse-report-v1";

/// Which split a command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Val,
    Test,
}

impl Split {
    pub fn tag(&self) -> &'static str {
        match self {
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn file_name(&self) -> &'static str {
        match self {
            Split::Val => "val.jsonl",
            Split::Test => "test.jsonl",
        }
    }
}

/// Written next to the generated splits: the generator config, the
/// long-tail profile, and the split sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub dataset: crate::data::DatasetConfig,
    pub class_counts: Vec<usize>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

/// Reproducibility record for a `train` or `eval` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub library_version: String,
    pub config: ExperimentConfig,
    pub modality: Option<Modality>,
    pub n_train_samples: Option<usize>,
    pub epoch_loss: Vec<f64>,
    /// Focusing parameter per epoch; absent for cross-entropy runs.
    pub gamma_per_epoch: Option<Vec<f64>>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

/// Mean per-class F1 over the most and least frequent thirds of classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadTailF1 {
    pub head_f1: f64,
    pub tail_f1: f64,
}

/// One written evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub split: Split,
    pub mode: String,
    pub head_tail: Option<HeadTailF1>,
    pub report: MetricsReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::FileFormat {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    std::fs::write(path, json + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::FileFormat {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Paths produced by `gen`.
#[derive(Debug, Clone)]
pub struct GenOutputs {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
    pub manifest: PathBuf,
    pub class_counts: Vec<usize>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

/// Generates the synthetic benchmark and writes the three splits plus a
/// dataset manifest into the output directory.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<GenOutputs> {
    cfg.validate()?;
    let dataset_cfg = cfg.dataset_config();
    let dataset = generate(&dataset_cfg)?;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let train = dir.join("train.jsonl");
    let val = dir.join("val.jsonl");
    let test = dir.join("test.jsonl");
    let manifest_path = dir.join("dataset.json");
    write_dataset(&train, &dataset.train)?;
    write_dataset(&val, &dataset.val)?;
    write_dataset(&test, &dataset.test)?;
    let counts = class_counts(&dataset_cfg);
    let manifest = DatasetManifest {
        format: DATASET_MANIFEST_FORMAT.to_string(),
        dataset: dataset_cfg,
        class_counts: counts.clone(),
        n_train: dataset.train.len(),
        n_val: dataset.val.len(),
        n_test: dataset.test.len(),
    };
    write_json(&manifest_path, &manifest)?;
    Ok(GenOutputs {
        train,
        val,
        test,
        manifest: manifest_path,
        class_counts: counts,
        n_train: dataset.train.len(),
        n_val: dataset.val.len(),
        n_test: dataset.test.len(),
    })
}

fn read_split(dir: &Path, name: &str) -> Result<Vec<Sample>> {
    read_dataset(&dir.join(name))
}

/// Cross-checks the experiment config against a dataset manifest when
/// one is present (externally assembled datasets may omit it).
fn check_dataset_manifest(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let path = dir.join("dataset.json");
    if !path.exists() {
        return Ok(());
    }
    let manifest: DatasetManifest = read_json(&path)?;
    let d = &manifest.dataset;
    if d.k != cfg.k || d.d_a != cfg.d_a || d.d_b != cfg.d_b {
        return Err(Error::Config(format!(
            "dataset/config mismatch: dataset has k={} d-a={} d-b={}, config has k={} d-a={} d-b={}",
            d.k, d.d_a, d.d_b, cfg.k, cfg.d_a, cfg.d_b
        )));
    }
    Ok(())
}

/// Paths and logs produced by `train`.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub manifest: PathBuf,
    pub epoch_logs: Vec<EpochLog>,
    pub n_train_samples: usize,
}

/// Trains one modality pathway on a dataset directory and writes the
/// checkpoint plus a run manifest.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    dataset_dir: &Path,
    modality: Modality,
) -> Result<TrainOutputs> {
    cfg.validate()?;
    check_dataset_manifest(cfg, dataset_dir)?;
    let started = Instant::now();
    let mut train_set = read_split(dataset_dir, "train.jsonl")?;
    if cfg.merge_val_into_train {
        train_set.extend(read_split(dataset_dir, "val.jsonl")?);
    }
    let outcome = train_modality(cfg, &train_set, modality)?;

    ensure_dir(&cfg.output_dir)?;
    let stem = format!("{}_{}", modality.tag(), cfg.loss.tag());
    let checkpoint_path = cfg.output_dir.join(format!("checkpoint_{stem}.json"));
    let manifest_path = cfg.output_dir.join(format!("train_manifest_{stem}.json"));
    let checkpoint = Checkpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        modality,
        feature_dim: outcome.params.feature_dim(),
        hidden_dim: outcome.params.hidden_dim(),
        class_count: outcome.params.class_count(),
        clip_len: cfg.clip_len,
        seed: cfg.seed,
        epochs: cfg.epochs,
        loss: cfg.loss,
        schedule: match cfg.loss {
            LossKind::Focal => Some(cfg.schedule()?),
            LossKind::Ce => None,
        },
        params: outcome.params,
        optimizer: outcome.optimizer,
    };
    checkpoint.save(&checkpoint_path)?;
    let manifest = RunManifest {
        format: RUN_MANIFEST_FORMAT.to_string(),
        command: "train".to_string(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        modality: Some(modality),
        n_train_samples: Some(train_set.len()),
        epoch_loss: outcome.epoch_logs.iter().map(|l| l.mean_loss).collect(),
        gamma_per_epoch: match cfg.loss {
            LossKind::Focal => Some(
                outcome
                    .epoch_logs
                    .iter()
                    .map(|l| l.gamma.expect("focal runs log gamma"))
                    .collect(),
            ),
            LossKind::Ce => None,
        },
        outputs: vec![checkpoint_path.display().to_string()],
        duration_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&manifest_path, &manifest)?;
    Ok(TrainOutputs {
        checkpoint: checkpoint_path,
        manifest: manifest_path,
        epoch_logs: outcome.epoch_logs,
        n_train_samples: train_set.len(),
    })
}

/// One evaluated mode with its written report.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub mode: String,
    pub path: PathBuf,
    pub report: MetricsReport,
    pub head_tail: Option<HeadTailF1>,
}

/// Paths and reports produced by `eval`.
#[derive(Debug, Clone)]
pub struct EvalOutputs {
    pub reports: Vec<EvalReport>,
    pub confusion_csv: Option<PathBuf>,
    pub manifest: PathBuf,
}

fn load_checkpoint_for(slot: Modality, path: &Path) -> Result<Checkpoint> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.modality != slot {
        return Err(Error::Config(format!(
            "{} was trained on modality {}, but was passed as checkpoint-{}",
            path.display(),
            ckpt.modality.tag(),
            slot.tag()
        )));
    }
    Ok(ckpt)
}

fn check_checkpoint_fits(ckpt: &Checkpoint, samples: &[Sample]) -> Result<()> {
    for s in samples {
        let width = s.seq(ckpt.modality).cols();
        if width != ckpt.feature_dim {
            return Err(Error::Config(format!(
                "checkpoint/dataset mismatch: checkpoint expects modality-{} width {}, sample {} has {width}",
                ckpt.modality.tag(),
                ckpt.feature_dim,
                s.id
            )));
        }
        if s.label >= ckpt.class_count {
            return Err(Error::Config(format!(
                "checkpoint/dataset mismatch: sample {} has label {} but checkpoint has {} classes",
                s.id, s.label, ckpt.class_count
            )));
        }
    }
    Ok(())
}

/// Per-class training-label counts, used to rank classes for the
/// head/tail F1 slice.
fn train_label_counts(dir: &Path, classes: usize) -> Result<Vec<usize>> {
    let train = read_split(dir, "train.jsonl")?;
    let mut counts = vec![0usize; classes];
    for s in &train {
        if s.label < classes {
            counts[s.label] += 1;
        }
    }
    Ok(counts)
}

/// Evaluates one or two checkpoints on a split. With two checkpoints the
/// three reports mirror the single-modality and fused rows of the result
/// grid, the fused run additionally gets a confusion-matrix CSV and the
/// head/tail F1 slice.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    dataset_dir: &Path,
    checkpoint_a: Option<&Path>,
    checkpoint_b: Option<&Path>,
    split: Split,
) -> Result<EvalOutputs> {
    let started = Instant::now();
    let ckpt_a = checkpoint_a
        .map(|p| load_checkpoint_for(Modality::A, p))
        .transpose()?;
    let ckpt_b = checkpoint_b
        .map(|p| load_checkpoint_for(Modality::B, p))
        .transpose()?;
    if ckpt_a.is_none() && ckpt_b.is_none() {
        return Err(Error::Config(
            "eval needs at least one of --checkpoint-a / --checkpoint-b".to_string(),
        ));
    }
    let samples = read_split(dataset_dir, split.file_name())?;
    if let Some(c) = &ckpt_a {
        check_checkpoint_fits(c, &samples)?;
    }
    if let Some(c) = &ckpt_b {
        check_checkpoint_fits(c, &samples)?;
    }

    ensure_dir(&cfg.output_dir)?;
    let mut reports = Vec::new();
    let mut confusion_csv = None;
    let write_report =
        |mode: &str, report: MetricsReport, head_tail: Option<HeadTailF1>| -> Result<EvalReport> {
            let path = cfg
                .output_dir
                .join(format!("report_{}_{mode}.json", split.tag()));
            let file = ReportFile {
                format: REPORT_FORMAT.to_string(),
                split,
                mode: mode.to_string(),
                head_tail,
                report,
            };
            write_json(&path, &file)?;
            Ok(EvalReport {
                mode: mode.to_string(),
                path,
                report: file.report,
                head_tail,
            })
        };

    match (&ckpt_a, &ckpt_b) {
        (Some(a), Some(b)) => {
            if a.class_count != b.class_count {
                return Err(Error::Config(format!(
                    "checkpoints disagree on class count: {} vs {}",
                    a.class_count, b.class_count
                )));
            }
            if a.clip_len != b.clip_len {
                return Err(Error::Config(format!(
                    "checkpoints disagree on clip length: {} vs {}",
                    a.clip_len, b.clip_len
                )));
            }
            for mode in [FusionMode::AOnly, FusionMode::BOnly, FusionMode::Fused] {
                let report = evaluate_models(&a.params, &b.params, &samples, a.clip_len, mode)?;
                let head_tail = if mode == FusionMode::Fused {
                    let counts = train_label_counts(dataset_dir, a.class_count)?;
                    let (head_f1, tail_f1) = tail_slice(&report, &counts)?;
                    let csv_path = cfg
                        .output_dir
                        .join(format!("confusion_{}_fused.csv", split.tag()));
                    std::fs::write(&csv_path, report.confusion.to_csv()).map_err(|e| {
                        Error::Io {
                            path: csv_path.clone(),
                            source: e,
                        }
                    })?;
                    confusion_csv = Some(csv_path);
                    Some(HeadTailF1 { head_f1, tail_f1 })
                } else {
                    None
                };
                reports.push(write_report(mode.tag(), report, head_tail)?);
            }
        }
        (one, another) => {
            let ckpt = one.as_ref().or(another.as_ref()).expect("checked above");
            let report = evaluate_single(&ckpt.params, ckpt.modality, &samples, ckpt.clip_len)?;
            let mode = match ckpt.modality {
                Modality::A => "a_only",
                Modality::B => "b_only",
            };
            reports.push(write_report(mode, report, None)?);
        }
    }

    let manifest_path = cfg
        .output_dir
        .join(format!("eval_manifest_{}.json", split.tag()));
    let manifest = RunManifest {
        format: RUN_MANIFEST_FORMAT.to_string(),
        command: "eval".to_string(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        modality: None,
        n_train_samples: None,
        epoch_loss: Vec::new(),
        gamma_per_epoch: None,
        outputs: reports
            .iter()
            .map(|r| r.path.display().to_string())
            .chain(confusion_csv.iter().map(|p| p.display().to_string()))
            .collect(),
        duration_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&manifest_path, &manifest)?;
    Ok(EvalOutputs {
        reports,
        confusion_csv,
        manifest: manifest_path,
    })
}
