//! Cross-entropy and focal classification losses with analytic gradients
//! over the pre-softmax logits, plus the exponential focusing-parameter
//! decay schedule.
//!
//! The focal loss scales cross-entropy by `(1 - p_t)^gamma`, which
//! down-weights well-classified examples; `gamma = 0` recovers plain
//! cross-entropy exactly, in both value and gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::ProbDist;

/// Probabilities are clamped to this floor before logs and powers, so
/// `0^(gamma-1)` can never produce a NaN when `gamma < 1` and `p_t = 1`.
const PROB_FLOOR: f64 = 1e-12;

/// Per-epoch geometric decay of the focusing parameter between two
/// endpoints: `gamma(e) = start * (end/start)^(e / (total_epochs - 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSchedule {
    gamma_start: f64,
    gamma_end: f64,
    total_epochs: usize,
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule {
            gamma_start: 2.0,
            gamma_end: 0.1,
            total_epochs: 20,
        }
    }
}

impl GammaSchedule {
    pub fn new(gamma_start: f64, gamma_end: f64, total_epochs: usize) -> Result<Self> {
        if !gamma_start.is_finite() || gamma_start <= 0.0 {
            return Err(Error::InvalidArgument {
                arg: "gamma_start",
                reason: format!("must be finite and positive, got {gamma_start}"),
            });
        }
        if !gamma_end.is_finite() || gamma_end <= 0.0 {
            return Err(Error::InvalidArgument {
                arg: "gamma_end",
                reason: format!("must be finite and positive, got {gamma_end}"),
            });
        }
        if gamma_end > gamma_start {
            return Err(Error::InvalidArgument {
                arg: "gamma_end",
                reason: format!("must not exceed gamma_start ({gamma_end} > {gamma_start})"),
            });
        }
        if total_epochs == 0 {
            return Err(Error::InvalidArgument {
                arg: "total_epochs",
                reason: "must be at least 1".to_string(),
            });
        }
        Ok(GammaSchedule {
            gamma_start,
            gamma_end,
            total_epochs,
        })
    }

    pub fn gamma_start(&self) -> f64 {
        self.gamma_start
    }

    pub fn gamma_end(&self) -> f64 {
        self.gamma_end
    }

    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    /// Focusing parameter for `epoch` in `[0, total_epochs)`. The first
    /// epoch returns `gamma_start` and the last returns `gamma_end`; a
    /// one-epoch schedule returns `gamma_start`.
    pub fn gamma_at_epoch(&self, epoch: usize) -> Result<f64> {
        if epoch >= self.total_epochs {
            return Err(Error::InvalidArgument {
                arg: "epoch",
                reason: format!(
                    "epoch {epoch} out of range for a {}-epoch schedule",
                    self.total_epochs
                ),
            });
        }
        if self.total_epochs == 1 {
            return Ok(self.gamma_start);
        }
        let t = epoch as f64 / (self.total_epochs - 1) as f64;
        Ok(self.gamma_start * (self.gamma_end / self.gamma_start).powf(t))
    }
}

/// A scalar loss together with its gradient w.r.t. the logits that
/// produced the input distribution through softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad_logits: Vec<f64>,
}

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Cross-entropy `-log p_label` with the standard softmax gradient
/// `grad[k] = p_k - 1{k = label}`.
pub fn ce_loss(probs: &ProbDist, label: usize) -> Result<LossValue> {
    check_label(label, probs.len())?;
    let p_t = probs[label].clamp(PROB_FLOOR, 1.0);
    let value = -p_t.ln();
    let grad_logits = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| p - if k == label { 1.0 } else { 0.0 })
        .collect();
    Ok(LossValue { value, grad_logits })
}

/// Focal loss `-(1 - p_t)^gamma * log(p_t)` for the true class, with the
/// gradient taken through the softmax:
///
/// ```text
/// dL/dp_t    = gamma * u^(gamma-1) * log(p_t) - u^gamma / p_t,  u = 1 - p_t
/// dp_t/dz_k  = p_t * (1{k = label} - p_k)
/// ```
pub fn focal_loss(probs: &ProbDist, label: usize, gamma: f64) -> Result<LossValue> {
    check_label(label, probs.len())?;
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidArgument {
            arg: "gamma",
            reason: format!("must be finite and nonnegative, got {gamma}"),
        });
    }
    let p_t = probs[label];
    let p_t_c = p_t.clamp(PROB_FLOOR, 1.0);
    let u = (1.0 - p_t).clamp(PROB_FLOOR, 1.0);
    let log_p = p_t_c.ln();
    let value = -u.powf(gamma) * log_p;
    // coeff = dL/dp_t * p_t, grouped so that gamma = 0 reproduces the
    // cross-entropy gradient bit-for-bit (u^0 = 1 and p_t/p_t = 1 exactly).
    let coeff = gamma * u.powf(gamma - 1.0) * log_p * p_t - u.powf(gamma) * (p_t / p_t_c);
    let grad_logits = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| coeff * (if k == label { 1.0 } else { 0.0 } - p))
        .collect();
    Ok(LossValue { value, grad_logits })
}

/// Mean loss over a minibatch, with per-sample logit gradients already
/// scaled by `1/batch_size` so they can be accumulated directly.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub mean_value: f64,
    pub per_sample_grads: Vec<Vec<f64>>,
}

pub fn batch_loss(probs_batch: &[ProbDist], labels: &[usize], gamma: f64) -> Result<BatchLoss> {
    if probs_batch.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    if probs_batch.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "batch_loss",
            expected: format!("{} labels", probs_batch.len()),
            got: format!("{} labels", labels.len()),
        });
    }
    let scale = 1.0 / probs_batch.len() as f64;
    let mut mean_value = 0.0;
    let mut per_sample_grads = Vec::with_capacity(probs_batch.len());
    for (probs, &label) in probs_batch.iter().zip(labels) {
        let mut loss = focal_loss(probs, label, gamma)?;
        mean_value += loss.value * scale;
        for g in &mut loss.grad_logits {
            *g *= scale;
        }
        per_sample_grads.push(loss.grad_logits);
    }
    Ok(BatchLoss {
        mean_value,
        per_sample_grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{softmax, Rng};

    fn dist(p: Vec<f64>) -> ProbDist {
        ProbDist::new(p).unwrap()
    }

    #[test]
    fn ce_even_split() {
        let loss = ce_loss(&dist(vec![0.5, 0.5]), 0).unwrap();
        assert!((loss.value - 2f64.ln()).abs() < 1e-15);
        assert_eq!(loss.grad_logits, vec![-0.5, 0.5]);
    }

    #[test]
    fn ce_perfect_prediction_is_zero() {
        let loss = ce_loss(&dist(vec![1.0, 0.0]), 0).unwrap();
        assert_eq!(loss.value, 0.0);
        assert_eq!(loss.grad_logits, vec![0.0, 0.0]);
    }

    #[test]
    fn ce_confident_correct() {
        let loss = ce_loss(&dist(vec![0.9, 0.05, 0.05]), 0).unwrap();
        assert!((loss.value - 0.105_361).abs() < 1e-6);
    }

    #[test]
    fn ce_rejects_out_of_range_label() {
        assert!(ce_loss(&dist(vec![0.5, 0.5]), 2).is_err());
    }

    #[test]
    fn focal_gamma_zero_equals_ce() {
        let mut rng = Rng::new(2024);
        for _ in 0..1000 {
            let k = 2 + rng.gen_range(11);
            let z: Vec<f64> = (0..k).map(|_| rng.gaussian() * 2.0).collect();
            let probs = softmax(&z).unwrap();
            let label = rng.gen_range(k);
            let ce = ce_loss(&probs, label).unwrap();
            let focal = focal_loss(&probs, label, 0.0).unwrap();
            assert!((ce.value - focal.value).abs() <= 1e-12);
            for (a, b) in ce.grad_logits.iter().zip(&focal.grad_logits) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn focal_even_split_gamma_two() {
        let loss = focal_loss(&dist(vec![0.5, 0.5]), 0, 2.0).unwrap();
        assert!((loss.value - 0.173_287).abs() < 1e-6);
    }

    #[test]
    fn focal_confident_gamma_two() {
        let loss = focal_loss(&dist(vec![0.9, 0.05, 0.05]), 0, 2.0).unwrap();
        assert!((loss.value - 0.001_053_61).abs() < 1e-8);
    }

    #[test]
    fn focal_rejects_negative_gamma_and_bad_label() {
        let p = dist(vec![0.5, 0.5]);
        assert!(focal_loss(&p, 0, -0.5).is_err());
        assert!(focal_loss(&p, 2, 1.0).is_err());
    }

    #[test]
    fn focal_never_exceeds_ce() {
        let mut rng = Rng::new(7);
        for _ in 0..500 {
            let k = 2 + rng.gen_range(9);
            let z: Vec<f64> = (0..k).map(|_| rng.gaussian() * 2.0).collect();
            let probs = softmax(&z).unwrap();
            let label = rng.gen_range(k);
            let ce = ce_loss(&probs, label).unwrap().value;
            for gamma in [0.1, 0.5, 1.0, 2.0] {
                let focal = focal_loss(&probs, label, gamma).unwrap().value;
                assert!(focal < ce, "gamma {gamma}: focal {focal} >= ce {ce}");
            }
        }
    }

    #[test]
    fn focal_value_decreases_in_p_label() {
        // K = 2, gamma = 2: harder examples cost strictly more.
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let v = focal_loss(&dist(vec![p, 1.0 - p]), 0, 2.0).unwrap().value;
            assert!(v < prev, "not decreasing at p = {p}");
            prev = v;
        }
    }

    #[test]
    fn focal_gradient_matches_finite_differences() {
        let mut rng = Rng::new(11);
        let h = 1e-6;
        for _ in 0..50 {
            let k = 3 + rng.gen_range(6);
            let z: Vec<f64> = (0..k).map(|_| rng.gaussian() * 1.5).collect();
            let label = rng.gen_range(k);
            for gamma in [0.0, 0.1, 0.5, 1.0, 2.0] {
                let analytic = focal_loss(&softmax(&z).unwrap(), label, gamma)
                    .unwrap()
                    .grad_logits;
                let mut numeric = vec![0.0; k];
                for j in 0..k {
                    let mut zp = z.clone();
                    zp[j] += h;
                    let fp = focal_loss(&softmax(&zp).unwrap(), label, gamma)
                        .unwrap()
                        .value;
                    zp[j] -= 2.0 * h;
                    let fm = focal_loss(&softmax(&zp).unwrap(), label, gamma)
                        .unwrap()
                        .value;
                    numeric[j] = (fp - fm) / (2.0 * h);
                }
                let scale = analytic
                    .iter()
                    .chain(&numeric)
                    .fold(0.0f64, |m, x| m.max(x.abs()))
                    .max(1e-12);
                for (a, n) in analytic.iter().zip(&numeric) {
                    assert!(
                        (a - n).abs() / scale <= 1e-6,
                        "gamma {gamma}: analytic {a} vs numeric {n}"
                    );
                }
            }
        }
    }

    #[test]
    fn schedule_default_endpoints() {
        let s = GammaSchedule::default();
        assert_eq!(s.gamma_at_epoch(0).unwrap(), 2.0);
        assert!((s.gamma_at_epoch(19).unwrap() - 0.1).abs() <= 1e-12);
    }

    #[test]
    fn schedule_geometric_midpoint() {
        let s = GammaSchedule::new(2.0, 0.1, 21).unwrap();
        // epoch 10 of 21 sits at the geometric mean sqrt(2 * 0.1)
        assert!((s.gamma_at_epoch(10).unwrap() - 0.2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn schedule_strictly_decreasing() {
        let s = GammaSchedule::default();
        let mut prev = f64::INFINITY;
        for e in 0..s.total_epochs() {
            let g = s.gamma_at_epoch(e).unwrap();
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn schedule_single_epoch_returns_start() {
        let s = GammaSchedule::new(2.0, 0.1, 1).unwrap();
        assert_eq!(s.gamma_at_epoch(0).unwrap(), 2.0);
    }

    #[test]
    fn schedule_rejects_bad_arguments() {
        assert!(GammaSchedule::new(0.0, 0.1, 20).is_err());
        assert!(GammaSchedule::new(2.0, -0.1, 20).is_err());
        assert!(GammaSchedule::new(0.1, 2.0, 20).is_err());
        assert!(GammaSchedule::new(2.0, 0.1, 0).is_err());
        assert!(GammaSchedule::default().gamma_at_epoch(20).is_err());
    }

    #[test]
    fn batch_of_one_equals_single_sample() {
        let p = dist(vec![0.7, 0.3]);
        let single = focal_loss(&p, 0, 1.0).unwrap();
        let batch = batch_loss(&[p], &[0], 1.0).unwrap();
        assert_eq!(batch.mean_value, single.value);
        assert_eq!(batch.per_sample_grads[0], single.grad_logits);
    }

    #[test]
    fn two_identical_samples_same_mean() {
        let p = dist(vec![0.7, 0.3]);
        let one = batch_loss(std::slice::from_ref(&p), &[0], 2.0).unwrap();
        let two = batch_loss(&[p.clone(), p], &[0, 0], 2.0).unwrap();
        assert!((one.mean_value - two.mean_value).abs() < 1e-15);
    }

    #[test]
    fn batch_mean_of_hand_computed_values() {
        // ce values ln 2 = 0.693147 and -ln 0.9 = 0.105361
        let batch =
            batch_loss(&[dist(vec![0.5, 0.5]), dist(vec![0.9, 0.1])], &[0, 0], 0.0).unwrap();
        assert!((batch.mean_value - 0.399_254).abs() < 1e-6);
    }

    #[test]
    fn batch_rejects_mismatch_and_empty() {
        let p = dist(vec![0.5, 0.5]);
        assert!(batch_loss(&[p], &[0, 1], 0.0).is_err());
        assert!(batch_loss(&[], &[], 0.0).is_err());
    }
}
