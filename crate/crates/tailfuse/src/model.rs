//! Per-modality classifier head: temporal mean pooling over a clip's
//! frames followed by a two-layer perceptron producing class logits,
//! with the full backward pass.
//!
//! The head stands in for a large pretrained video backbone; the input
//! is whatever feature sequence that backbone (or the synthetic
//! generator) emits, and only the head is trained.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{relu, softmax, Matrix, ProbDist, Rng};

/// Trainable parameters: `w1` (H x D), `b1` (H), `w2` (K x H), `b2` (K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl HeadParams {
    /// He-style initialization: weights drawn N(0, 2/fan_in), biases zero.
    /// Draw order is `w1` row-major then `w2` row-major, so the result is
    /// a deterministic function of the generator state.
    pub fn init(rng: &mut Rng, d: usize, h: usize, k: usize) -> Result<Self> {
        if d == 0 || h == 0 || k == 0 {
            return Err(Error::InvalidArgument {
                arg: "head dims",
                reason: format!("dimensions must be positive, got d={d} h={h} k={k}"),
            });
        }
        let s1 = (2.0 / d as f64).sqrt();
        let w1 = Matrix::new(h, d, (0..h * d).map(|_| rng.gaussian() * s1).collect())?;
        let s2 = (2.0 / h as f64).sqrt();
        let w2 = Matrix::new(k, h, (0..k * h).map(|_| rng.gaussian() * s2).collect())?;
        Ok(HeadParams {
            w1,
            b1: vec![0.0; h],
            w2,
            b2: vec![0.0; k],
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn class_count(&self) -> usize {
        self.w2.rows()
    }

    /// Cross-checks the four shapes; used after loading a checkpoint.
    pub fn validate(&self) -> Result<()> {
        let (h, d, k) = (self.w1.rows(), self.w1.cols(), self.w2.rows());
        if self.b1.len() != h || self.w2.cols() != h || self.b2.len() != k {
            return Err(Error::ShapeMismatch {
                op: "HeadParams::validate",
                expected: format!("w1 {h}x{d}, b1 {h}, w2 {k}x{h}, b2 {k}"),
                got: format!(
                    "w1 {}x{}, b1 {}, w2 {}x{}, b2 {}",
                    self.w1.rows(),
                    self.w1.cols(),
                    self.b1.len(),
                    self.w2.rows(),
                    self.w2.cols(),
                    self.b2.len()
                ),
            });
        }
        if !self.b1.iter().chain(&self.b2).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("head biases"));
        }
        Ok(())
    }

    /// The four parameter arrays in a fixed order (w1, b1, w2, b2),
    /// shared by the optimizer and the checkpoint format.
    pub fn arrays_mut(&mut self) -> [&mut [f64]; 4] {
        let HeadParams { w1, b1, w2, b2 } = self;
        [w1.as_mut_slice(), b1, w2.as_mut_slice(), b2]
    }

    pub fn arrays(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }
}

/// Cached activations from one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    pub mask: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: ProbDist,
}

/// Parameter gradients, same shapes as [`HeadParams`].
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl HeadGrads {
    pub fn zeros_like(params: &HeadParams) -> Self {
        HeadGrads {
            w1: Matrix::zeros(params.w1.rows(), params.w1.cols()),
            b1: vec![0.0; params.b1.len()],
            w2: Matrix::zeros(params.w2.rows(), params.w2.cols()),
            b2: vec![0.0; params.b2.len()],
        }
    }

    /// Elementwise accumulation, used to sum per-sample gradients.
    pub fn accumulate(&mut self, other: &HeadGrads) {
        let add = |dst: &mut [f64], src: &[f64]| {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        };
        add(self.w1.as_mut_slice(), other.w1.as_slice());
        add(&mut self.b1, &other.b1);
        add(self.w2.as_mut_slice(), other.w2.as_slice());
        add(&mut self.b2, &other.b2);
    }

    pub fn arrays(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }
}

/// Forward pass over one clip (T x D): mean-pool the frames, then
/// `relu(w1 . pooled + b1)`, then logits and softmax.
pub fn forward(params: &HeadParams, clip: &Matrix) -> Result<ForwardTrace> {
    if clip.cols() != params.feature_dim() {
        return Err(Error::ShapeMismatch {
            op: "forward",
            expected: format!("clip width {}", params.feature_dim()),
            got: format!("clip width {}", clip.cols()),
        });
    }
    let pooled = clip.column_means();
    let mut pre1 = params.w1.matvec(&pooled)?;
    for (p, b) in pre1.iter_mut().zip(&params.b1) {
        *p += b;
    }
    let (hidden, mask) = relu(&pre1);
    let mut logits = params.w2.matvec(&hidden)?;
    for (l, b) in logits.iter_mut().zip(&params.b2) {
        *l += b;
    }
    let probs = softmax(&logits)?;
    Ok(ForwardTrace {
        pooled,
        hidden,
        mask,
        logits,
        probs,
    })
}

/// Backward pass from a logit gradient to all parameter gradients.
/// The input gradient is not propagated further; upstream features are
/// fixed.
pub fn backward(
    params: &HeadParams,
    trace: &ForwardTrace,
    grad_logits: &[f64],
) -> Result<HeadGrads> {
    let k = params.class_count();
    let h = params.hidden_dim();
    let d = params.feature_dim();
    if grad_logits.len() != k {
        return Err(Error::ShapeMismatch {
            op: "backward",
            expected: format!("grad_logits of length {k}"),
            got: format!("length {}", grad_logits.len()),
        });
    }
    if trace.hidden.len() != h || trace.pooled.len() != d {
        return Err(Error::ShapeMismatch {
            op: "backward",
            expected: format!("trace with hidden {h}, pooled {d}"),
            got: format!(
                "hidden {}, pooled {}",
                trace.hidden.len(),
                trace.pooled.len()
            ),
        });
    }

    let mut grads = HeadGrads::zeros_like(params);
    grads.b2.copy_from_slice(grad_logits);
    for (i, &g) in grad_logits.iter().enumerate() {
        for (j, &hj) in trace.hidden.iter().enumerate() {
            grads.w2.set(i, j, g * hj);
        }
    }
    // d(loss)/d(pre-activation) = (w2^T grad_logits) masked by relu
    let mut grad_pre1 = params.w2.matvec_transpose(grad_logits)?;
    for (g, m) in grad_pre1.iter_mut().zip(&trace.mask) {
        *g *= m;
    }
    grads.b1.copy_from_slice(&grad_pre1);
    for (i, &g) in grad_pre1.iter().enumerate() {
        for (j, &xj) in trace.pooled.iter().enumerate() {
            grads.w1.set(i, j, g * xj);
        }
    }
    Ok(grads)
}

/// Class distribution for one clip, without keeping the trace.
pub fn predict_proba(params: &HeadParams, clip: &Matrix) -> Result<ProbDist> {
    Ok(forward(params, clip)?.probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{ce_loss, focal_loss};

    fn clip_from(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_stated_shapes() {
        let a = HeadParams::init(&mut Rng::new(9), 8, 16, 4).unwrap();
        let b = HeadParams::init(&mut Rng::new(9), 8, 16, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.w1.rows(), a.w1.cols()), (16, 8));
        assert_eq!(a.b1.len(), 16);
        assert_eq!((a.w2.rows(), a.w2.cols()), (4, 16));
        assert_eq!(a.b2.len(), 4);
        assert!(a.b1.iter().all(|&x| x == 0.0));
        assert!(a.b2.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn init_rejects_zero_dims() {
        assert!(HeadParams::init(&mut Rng::new(0), 0, 4, 2).is_err());
    }

    #[test]
    fn forward_single_frame_pools_to_that_frame() {
        let params = HeadParams::init(&mut Rng::new(1), 3, 4, 2).unwrap();
        let trace = forward(&params, &clip_from(&[&[1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(trace.pooled, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn forward_identical_frames_pool_to_one_frame() {
        let params = HeadParams::init(&mut Rng::new(1), 2, 4, 3).unwrap();
        let frame = [0.5, -1.5];
        let trace = forward(&params, &clip_from(&[&frame, &frame, &frame, &frame])).unwrap();
        assert_eq!(trace.pooled, vec![0.5, -1.5]);
    }

    #[test]
    fn forward_zero_params_give_uniform_probs() {
        let params = HeadParams {
            w1: Matrix::zeros(4, 3),
            b1: vec![0.0; 4],
            w2: Matrix::zeros(5, 4),
            b2: vec![0.0; 5],
        };
        let trace = forward(&params, &clip_from(&[&[1.0, 2.0, 3.0]])).unwrap();
        for &p in trace.probs.iter() {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let params = HeadParams::init(&mut Rng::new(1), 3, 4, 2).unwrap();
        assert!(forward(&params, &clip_from(&[&[1.0, 2.0]])).is_err());
    }

    #[test]
    fn forward_is_frame_order_invariant() {
        let params = HeadParams::init(&mut Rng::new(4), 3, 8, 4).unwrap();
        let a = clip_from(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, -1.0], &[3.0, 3.0, 3.0]]);
        let b = clip_from(&[&[3.0, 3.0, 3.0], &[1.0, 0.0, 2.0], &[0.0, 1.0, -1.0]]);
        let pa = forward(&params, &a).unwrap().probs;
        let pb = forward(&params, &b).unwrap().probs;
        for (x, y) in pa.iter().zip(pb.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_zero_grad_logits_give_zero_grads() {
        let params = HeadParams::init(&mut Rng::new(2), 4, 5, 3).unwrap();
        let mut rng = Rng::new(3);
        let clip = Matrix::new(2, 4, rng.gaussian_vec(8)).unwrap();
        let trace = forward(&params, &clip).unwrap();
        let grads = backward(&params, &trace, &[0.0, 0.0, 0.0]).unwrap();
        assert!(grads.arrays().iter().all(|a| a.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn backward_grad_b2_is_grad_logits() {
        let params = HeadParams::init(&mut Rng::new(2), 4, 4, 3).unwrap();
        let mut rng = Rng::new(5);
        let clip = Matrix::new(3, 4, rng.gaussian_vec(12)).unwrap();
        let trace = forward(&params, &clip).unwrap();
        let g = [0.3, -0.2, -0.1];
        let grads = backward(&params, &trace, &g).unwrap();
        assert_eq!(grads.b2, g.to_vec());
    }

    #[test]
    fn backward_rejects_wrong_grad_length() {
        let params = HeadParams::init(&mut Rng::new(2), 4, 5, 3).unwrap();
        let mut rng = Rng::new(3);
        let clip = Matrix::new(2, 4, rng.gaussian_vec(8)).unwrap();
        let trace = forward(&params, &clip).unwrap();
        assert!(backward(&params, &trace, &[0.0, 0.0]).is_err());
    }

    /// Loss of the whole head as a function of its parameters, for the
    /// finite-difference oracle.
    fn head_loss(params: &HeadParams, clip: &Matrix, label: usize, gamma: Option<f64>) -> f64 {
        let trace = forward(params, clip).unwrap();
        match gamma {
            None => ce_loss(&trace.probs, label).unwrap().value,
            Some(g) => focal_loss(&trace.probs, label, g).unwrap().value,
        }
    }

    fn analytic_grads(
        params: &HeadParams,
        clip: &Matrix,
        label: usize,
        gamma: Option<f64>,
    ) -> HeadGrads {
        let trace = forward(params, clip).unwrap();
        let grad_logits = match gamma {
            None => ce_loss(&trace.probs, label).unwrap().grad_logits,
            Some(g) => focal_loss(&trace.probs, label, g).unwrap().grad_logits,
        };
        backward(params, &trace, &grad_logits).unwrap()
    }

    fn check_full_head_fd(seed: u64, gamma: Option<f64>) {
        let mut rng = Rng::new(seed);
        let (d, h, k) = (4, 5, 3);
        let mut params = HeadParams::init(&mut rng, d, h, k).unwrap();
        // nonzero biases so their gradients are exercised away from init
        for b in params.b1.iter_mut().chain(params.b2.iter_mut()) {
            *b = rng.gaussian() * 0.1;
        }
        let clip = Matrix::new(6, d, rng.gaussian_vec(6 * d)).unwrap();
        let label = rng.gen_range(k);
        let analytic = analytic_grads(&params, &clip, label, gamma);

        let step = 1e-6;
        let mut max_analytic = 0.0f64;
        let mut max_diff = 0.0f64;
        for slot in 0..4 {
            let len = params.arrays()[slot].len();
            for idx in 0..len {
                let mut plus = params.clone();
                plus.arrays_mut()[slot][idx] += step;
                let mut minus = params.clone();
                minus.arrays_mut()[slot][idx] -= step;
                let numeric = (head_loss(&plus, &clip, label, gamma)
                    - head_loss(&minus, &clip, label, gamma))
                    / (2.0 * step);
                let a = analytic.arrays()[slot][idx];
                max_analytic = max_analytic.max(a.abs()).max(numeric.abs());
                max_diff = max_diff.max((a - numeric).abs());
            }
        }
        let rel = max_diff / max_analytic.max(1e-12);
        assert!(rel <= 1e-6, "seed {seed} gamma {gamma:?}: rel err {rel}");
    }

    #[test]
    fn full_head_gradient_matches_finite_differences() {
        for seed in 0..20u64 {
            check_full_head_fd(100 + seed, None);
            check_full_head_fd(200 + seed, Some(0.1));
            check_full_head_fd(300 + seed, Some(2.0));
        }
    }

    #[test]
    fn gradient_step_decreases_sample_loss() {
        // one plain gradient-descent step with small lr on a single sample
        let lr = 1e-3;
        for seed in 0..50u64 {
            let mut rng = Rng::new(1000 + seed);
            let (d, h, k) = (4, 6, 3);
            let mut params = HeadParams::init(&mut rng, d, h, k).unwrap();
            let clip = Matrix::new(3, d, rng.gaussian_vec(3 * d)).unwrap();
            let label = rng.gen_range(k);
            let before = head_loss(&params, &clip, label, Some(2.0));
            let grads = analytic_grads(&params, &clip, label, Some(2.0));
            for (p, g) in params.arrays_mut().into_iter().zip(grads.arrays()) {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= lr * gi;
                }
            }
            let after = head_loss(&params, &clip, label, Some(2.0));
            assert!(after < before, "seed {seed}: {after} !< {before}");
        }
    }

    #[test]
    fn predict_proba_matches_forward() {
        let params = HeadParams::init(&mut Rng::new(8), 5, 6, 4).unwrap();
        let mut rng = Rng::new(9);
        let clip = Matrix::new(4, 5, rng.gaussian_vec(20)).unwrap();
        let p = predict_proba(&params, &clip).unwrap();
        let q = forward(&params, &clip).unwrap().probs;
        assert_eq!(p, q);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }
}
