//! Late fusion of per-modality probability distributions and the metric
//! suite: top-k accuracy, confusion matrix, per-class and macro
//! precision/recall/F1, and head/tail slices of per-class F1.

use serde::{Deserialize, Serialize};

use crate::data::{eval_clip, Modality, Sample};
use crate::error::{Error, Result};
use crate::model::{predict_proba, HeadParams};
use crate::numkernel::{argmax_first, ProbDist};

/// Arithmetic mean of two equally weighted distributions.
pub fn late_fuse(pa: &ProbDist, pb: &ProbDist) -> Result<ProbDist> {
    if pa.len() != pb.len() {
        return Err(Error::ShapeMismatch {
            op: "late_fuse",
            expected: format!("distributions of equal length {}", pa.len()),
            got: format!("{} and {}", pa.len(), pb.len()),
        });
    }
    let fused = pa
        .iter()
        .zip(pb.iter())
        .map(|(a, b)| (a + b) / 2.0)
        .collect();
    Ok(ProbDist::new_unchecked(fused))
}

/// Rank of `label` among the classes of `probs`, counting ties in favor
/// of lower indices. Rank 0 means `label` is the top prediction.
fn label_rank(probs: &ProbDist, label: usize) -> usize {
    let p = probs[label];
    probs
        .iter()
        .enumerate()
        .filter(|&(j, &q)| q > p || (q == p && j < label))
        .count()
}

/// Fraction of samples whose label lands in the top `k` classes by
/// probability (ties broken toward lower indices; `k >= K` yields 1).
pub fn top_k_accuracy(probs: &[ProbDist], labels: &[usize], k: usize) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    if probs.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "top_k_accuracy",
            expected: format!("{} labels", probs.len()),
            got: format!("{} labels", labels.len()),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument {
            arg: "k",
            reason: "must be at least 1".to_string(),
        });
    }
    let mut hits = 0usize;
    for (p, &label) in probs.iter().zip(labels) {
        if label >= p.len() {
            return Err(Error::LabelOutOfRange {
                label,
                classes: p.len(),
            });
        }
        if label_rank(p, label) < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / probs.len() as f64)
}

/// Square matrix of prediction counts: `counts[true][pred]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u64>>", into = "Vec<Vec<u64>>")]
pub struct Confusion {
    classes: usize,
    counts: Vec<u64>,
}

impl From<Confusion> for Vec<Vec<u64>> {
    fn from(c: Confusion) -> Self {
        (0..c.classes).map(|t| c.row(t).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<u64>>> for Confusion {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u64>>) -> Result<Self> {
        let classes = rows.len();
        if classes == 0 || rows.iter().any(|r| r.len() != classes) {
            return Err(Error::ShapeMismatch {
                op: "Confusion",
                expected: "a nonempty square matrix".to_string(),
                got: format!("{} rows", classes),
            });
        }
        Ok(Confusion {
            classes,
            counts: rows.into_iter().flatten().collect(),
        })
    }
}

impl Confusion {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, true_class: usize, pred_class: usize) -> u64 {
        self.counts[true_class * self.classes + pred_class]
    }

    pub fn row(&self, true_class: usize) -> &[u64] {
        &self.counts[true_class * self.classes..(true_class + 1) * self.classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    /// Per-class supports (row sums).
    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.classes)
            .map(|t| self.row(t).iter().sum())
            .collect()
    }

    /// Per-class prediction counts (column sums).
    pub fn col_sums(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.classes];
        for t in 0..self.classes {
            for (o, &c) in out.iter_mut().zip(self.row(t)) {
                *o += c;
            }
        }
        out
    }

    /// Comma-separated rendering with a header row and column of class
    /// indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in 0..self.classes {
            out.push(',');
            out.push_str(&p.to_string());
        }
        out.push('\n');
        for t in 0..self.classes {
            out.push_str(&t.to_string());
            for &c in self.row(t) {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Tallies `confusion[true][pred]` over paired label sequences.
pub fn confusion_matrix(
    pred_labels: &[usize],
    true_labels: &[usize],
    classes: usize,
) -> Result<Confusion> {
    if pred_labels.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    if pred_labels.len() != true_labels.len() {
        return Err(Error::ShapeMismatch {
            op: "confusion_matrix",
            expected: format!("{} true labels", pred_labels.len()),
            got: format!("{} true labels", true_labels.len()),
        });
    }
    let mut counts = vec![0u64; classes * classes];
    for (&p, &t) in pred_labels.iter().zip(true_labels) {
        if p >= classes || t >= classes {
            return Err(Error::LabelOutOfRange {
                label: p.max(t),
                classes,
            });
        }
        counts[t * classes + p] += 1;
    }
    Ok(Confusion { classes, counts })
}

/// Per-class precision/recall/F1 plus their unweighted means over
/// classes with nonzero support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfBreakdown {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// Derives precision, recall, and F1 from a confusion matrix. Any 0/0 is
/// defined as 0; classes that never occur (zero support) are excluded
/// from the macro means.
pub fn macro_prf(confusion: &Confusion) -> Result<PrfBreakdown> {
    if confusion.total() == 0 {
        return Err(Error::EmptyInput("confusion matrix"));
    }
    let k = confusion.classes();
    let supports = confusion.row_sums();
    let predicted = confusion.col_sums();
    let mut precision = vec![0.0; k];
    let mut recall = vec![0.0; k];
    let mut f1 = vec![0.0; k];
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    for c in 0..k {
        let diag = confusion.get(c, c) as f64;
        precision[c] = ratio(diag, predicted[c] as f64);
        recall[c] = ratio(diag, supports[c] as f64);
        f1[c] = ratio(2.0 * precision[c] * recall[c], precision[c] + recall[c]);
    }
    let present: Vec<usize> = (0..k).filter(|&c| supports[c] > 0).collect();
    let mean_over = |xs: &[f64]| present.iter().map(|&c| xs[c]).sum::<f64>() / present.len() as f64;
    Ok(PrfBreakdown {
        macro_precision: mean_over(&precision),
        macro_recall: mean_over(&recall),
        macro_f1: mean_over(&f1),
        precision,
        recall,
        f1,
    })
}

/// Full evaluation report: Top-1/Top-5 accuracy, per-class and macro
/// precision/recall/F1, support-weighted recall, the confusion matrix,
/// and per-class supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_samples: usize,
    pub top1: f64,
    pub top5: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Support-weighted mean of per-class recall; coincides with top1.
    pub weighted_recall: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
    pub support: Vec<u64>,
    pub confusion: Confusion,
}

/// Builds the full report from per-sample distributions and labels.
pub fn metrics_report(probs: &[ProbDist], labels: &[usize]) -> Result<MetricsReport> {
    if probs.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    let classes = probs[0].len();
    if probs.iter().any(|p| p.len() != classes) {
        return Err(Error::ShapeMismatch {
            op: "metrics_report",
            expected: format!("distributions of length {classes}"),
            got: "mixed lengths".to_string(),
        });
    }
    let top1 = top_k_accuracy(probs, labels, 1)?;
    let top5 = top_k_accuracy(probs, labels, 5)?;
    let preds: Vec<usize> = probs
        .iter()
        .map(|p| argmax_first(p.as_slice()))
        .collect::<Result<_>>()?;
    let confusion = confusion_matrix(&preds, labels, classes)?;
    let prf = macro_prf(&confusion)?;
    let support = confusion.row_sums();
    let total: u64 = support.iter().sum();
    let weighted_recall = support
        .iter()
        .zip(&prf.recall)
        .map(|(&s, r)| s as f64 * r)
        .sum::<f64>()
        / total as f64;
    Ok(MetricsReport {
        n_samples: probs.len(),
        top1,
        top5,
        macro_precision: prf.macro_precision,
        macro_recall: prf.macro_recall,
        macro_f1: prf.macro_f1,
        weighted_recall,
        per_class_precision: prf.precision,
        per_class_recall: prf.recall,
        per_class_f1: prf.f1,
        support,
        confusion,
    })
}

/// How to combine the two pathway outputs during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    AOnly,
    BOnly,
    Fused,
}

impl FusionMode {
    pub fn tag(&self) -> &'static str {
        match self {
            FusionMode::AOnly => "a_only",
            FusionMode::BOnly => "b_only",
            FusionMode::Fused => "fused",
        }
    }
}

fn check_model_fits(model: &HeadParams, samples: &[Sample], modality: Modality) -> Result<()> {
    for s in samples {
        let width = s.seq(modality).cols();
        if width != model.feature_dim() {
            return Err(Error::ShapeMismatch {
                op: "evaluate",
                expected: format!(
                    "modality {} features of width {}",
                    modality.tag(),
                    model.feature_dim()
                ),
                got: format!("sample {} has width {width}", s.id),
            });
        }
        if s.label >= model.class_count() {
            return Err(Error::LabelOutOfRange {
                label: s.label,
                classes: model.class_count(),
            });
        }
    }
    Ok(())
}

fn pathway_probs(
    model: &HeadParams,
    samples: &[Sample],
    modality: Modality,
    clip_len: usize,
) -> Result<Vec<ProbDist>> {
    samples
        .iter()
        .map(|s| {
            let clip = eval_clip(s.seq(modality), clip_len)?;
            predict_proba(model, &clip.frames)
        })
        .collect()
}

/// Evaluates one pathway on its own: deterministic center clip per
/// sample, then the full metric suite.
pub fn evaluate_single(
    model: &HeadParams,
    modality: Modality,
    samples: &[Sample],
    clip_len: usize,
) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    check_model_fits(model, samples, modality)?;
    let probs = pathway_probs(model, samples, modality, clip_len)?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    metrics_report(&probs, &labels)
}

/// Evaluates the two pathways together under the requested fusion mode
/// (single-modality modes pass the corresponding pathway through).
pub fn evaluate_models(
    model_a: &HeadParams,
    model_b: &HeadParams,
    samples: &[Sample],
    clip_len: usize,
    mode: FusionMode,
) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    if model_a.class_count() != model_b.class_count() {
        return Err(Error::ShapeMismatch {
            op: "evaluate_models",
            expected: format!("{} classes in both models", model_a.class_count()),
            got: format!("{} classes in model b", model_b.class_count()),
        });
    }
    match mode {
        FusionMode::AOnly => evaluate_single(model_a, Modality::A, samples, clip_len),
        FusionMode::BOnly => evaluate_single(model_b, Modality::B, samples, clip_len),
        FusionMode::Fused => {
            check_model_fits(model_a, samples, Modality::A)?;
            check_model_fits(model_b, samples, Modality::B)?;
            let pa = pathway_probs(model_a, samples, Modality::A, clip_len)?;
            let pb = pathway_probs(model_b, samples, Modality::B, clip_len)?;
            let fused: Vec<ProbDist> = pa
                .iter()
                .zip(&pb)
                .map(|(a, b)| late_fuse(a, b))
                .collect::<Result<_>>()?;
            let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
            metrics_report(&fused, &labels)
        }
    }
}

/// Mean per-class F1 over the most and least frequent thirds of classes,
/// ranked by training count (ties keep the lower class index first).
pub fn tail_slice(report: &MetricsReport, class_counts: &[usize]) -> Result<(f64, f64)> {
    let k = report.per_class_f1.len();
    if class_counts.len() != k {
        return Err(Error::ShapeMismatch {
            op: "tail_slice",
            expected: format!("{k} class counts"),
            got: format!("{}", class_counts.len()),
        });
    }
    if k < 3 {
        return Err(Error::InvalidArgument {
            arg: "classes",
            reason: format!("head/tail slices need at least 3 classes, got {k}"),
        });
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| class_counts[b].cmp(&class_counts[a]));
    let slice = k / 3;
    let mean_f1 =
        |ids: &[usize]| ids.iter().map(|&c| report.per_class_f1[c]).sum::<f64>() / ids.len() as f64;
    let head_f1 = mean_f1(&order[..slice]);
    let tail_f1 = mean_f1(&order[k - slice..]);
    Ok((head_f1, tail_f1))
}
