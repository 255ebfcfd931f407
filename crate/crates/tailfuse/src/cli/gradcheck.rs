//! Finite-difference self-check for the analytic gradients.
//!
//! Two suites: loss-level (gradient of the focal loss w.r.t. logits,
//! 200 random instances over the gamma grid) and end-to-end (gradient
//! of the loss w.r.t. every head parameter, 20 random instances).
//!
//! Relative error is measured against the largest coordinate of either
//! gradient, `max|a - n| / max(max|a|, max|n|)`: with a central step of
//! 1e-6 in f64, individual near-zero coordinates carry rounding noise of
//! about 1e-10 in absolute terms, so a per-coordinate quotient would be
//! meaningless while the vector-scale quotient resolves 1e-6 cleanly.

use crate::error::{Error, Result};
use crate::loss::{ce_loss, focal_loss};
use crate::model::{backward, forward, HeadParams};
use crate::numkernel::{softmax, Matrix, Rng};

/// Gamma grid exercised by the loss-level suite.
pub const GAMMA_GRID: [f64; 5] = [0.0, 0.1, 0.5, 1.0, 2.0];

/// Tolerance on the vector-relative error of every check.
pub const TOLERANCE: f64 = 1e-6;

const FD_STEP: f64 = 1e-6;
const LOSS_CASES: usize = 200;
const HEAD_CASES: usize = 20;

/// Outcome of one suite member.
#[derive(Debug, Clone)]
pub struct CheckCase {
    pub label: String,
    pub rel_err: f64,
}

/// Aggregated gradcheck results.
#[derive(Debug, Clone)]
pub struct GradcheckReport {
    /// Max relative error per gamma over the loss-level suite.
    pub per_gamma: Vec<(f64, f64)>,
    pub max_loss_err: f64,
    pub max_head_err: f64,
    /// The single worst case across both suites.
    pub worst: CheckCase,
}

impl GradcheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.max_loss_err.max(self.max_head_err)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() <= TOLERANCE
    }

    /// Errors with the offending case when any check exceeds tolerance.
    pub fn into_result(self) -> Result<GradcheckReport> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::CheckFailed(format!(
                "gradient check: {} has relative error {:.3e} > {:.0e}",
                self.worst.label, self.worst.rel_err, TOLERANCE
            )))
        }
    }
}

fn vector_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()))
        / scale
}

/// Loss-level check for one instance: analytic logit gradient vs central
/// differences of the loss value.
fn loss_case_rel_err(z: &[f64], label: usize, gamma: f64, perturbation: f64) -> f64 {
    let mut analytic = focal_loss(&softmax(z).unwrap(), label, gamma)
        .unwrap()
        .grad_logits;
    analytic[0] += perturbation;
    let mut numeric = vec![0.0; z.len()];
    let mut zp = z.to_vec();
    for (j, n) in numeric.iter_mut().enumerate() {
        zp[j] = z[j] + FD_STEP;
        let fp = focal_loss(&softmax(&zp).unwrap(), label, gamma)
            .unwrap()
            .value;
        zp[j] = z[j] - FD_STEP;
        let fm = focal_loss(&softmax(&zp).unwrap(), label, gamma)
            .unwrap()
            .value;
        zp[j] = z[j];
        *n = (fp - fm) / (2.0 * FD_STEP);
    }
    vector_rel_err(&analytic, &numeric)
}

fn head_loss_value(params: &HeadParams, clip: &Matrix, label: usize, gamma: Option<f64>) -> f64 {
    let probs = forward(params, clip).unwrap().probs;
    match gamma {
        None => ce_loss(&probs, label).unwrap().value,
        Some(g) => focal_loss(&probs, label, g).unwrap().value,
    }
}

/// End-to-end check for one instance: analytic parameter gradients via
/// backprop vs central differences over every parameter.
fn head_case_rel_err(
    params: &HeadParams,
    clip: &Matrix,
    label: usize,
    gamma: Option<f64>,
    perturbation: f64,
) -> f64 {
    let trace = forward(params, clip).unwrap();
    let grad_logits = match gamma {
        None => ce_loss(&trace.probs, label).unwrap().grad_logits,
        Some(g) => focal_loss(&trace.probs, label, g).unwrap().grad_logits,
    };
    let grads = backward(params, &trace, &grad_logits).unwrap();

    let mut analytic: Vec<f64> = grads.arrays().concat();
    analytic[0] += perturbation;
    let mut numeric = Vec::with_capacity(analytic.len());
    for slot in 0..4 {
        let len = params.arrays()[slot].len();
        for idx in 0..len {
            let mut plus = params.clone();
            plus.arrays_mut()[slot][idx] += FD_STEP;
            let mut minus = params.clone();
            minus.arrays_mut()[slot][idx] -= FD_STEP;
            numeric.push(
                (head_loss_value(&plus, clip, label, gamma)
                    - head_loss_value(&minus, clip, label, gamma))
                    / (2.0 * FD_STEP),
            );
        }
    }
    vector_rel_err(&analytic, &numeric)
}

/// Runs both suites. `perturbation` is a test hook: a nonzero value is
/// added to one analytic gradient coordinate so the check must fail.
pub fn run_gradcheck(seed: u64, perturbation: f64) -> GradcheckReport {
    let mut rng = Rng::new(seed);
    let mut per_gamma: Vec<(f64, f64)> = GAMMA_GRID.iter().map(|&g| (g, 0.0)).collect();
    let mut worst = CheckCase {
        label: "none".to_string(),
        rel_err: 0.0,
    };
    let mut max_loss_err = 0.0f64;
    for case in 0..LOSS_CASES {
        let k = 3 + rng.gen_range(8);
        let z: Vec<f64> = (0..k).map(|_| rng.gaussian() * 1.5).collect();
        let label = rng.gen_range(k);
        for (slot, &gamma) in GAMMA_GRID.iter().enumerate() {
            let err = loss_case_rel_err(&z, label, gamma, perturbation);
            per_gamma[slot].1 = per_gamma[slot].1.max(err);
            max_loss_err = max_loss_err.max(err);
            if err > worst.rel_err {
                worst = CheckCase {
                    label: format!("loss case {case} (K={k}, gamma={gamma})"),
                    rel_err: err,
                };
            }
        }
    }

    let mut max_head_err = 0.0f64;
    for case in 0..HEAD_CASES {
        let d = 3 + rng.gen_range(4);
        let h = 3 + rng.gen_range(4);
        let k = 3 + rng.gen_range(4);
        let mut params = HeadParams::init(&mut rng, d, h, k).unwrap();
        for b in params.b1.iter_mut().chain(params.b2.iter_mut()) {
            *b = rng.gaussian() * 0.1;
        }
        let frames = 2 + rng.gen_range(6);
        let clip = Matrix::new(frames, d, rng.gaussian_vec(frames * d)).unwrap();
        let label = rng.gen_range(k);
        for gamma in [None, Some(0.1), Some(2.0)] {
            let err = head_case_rel_err(&params, &clip, label, gamma, perturbation);
            max_head_err = max_head_err.max(err);
            if err > worst.rel_err {
                worst = CheckCase {
                    label: format!("head case {case} (d={d}, h={h}, K={k}, gamma={gamma:?})"),
                    rel_err: err,
                };
            }
        }
    }

    GradcheckReport {
        per_gamma,
        max_loss_err,
        max_head_err,
        worst,
    }
}
