//! AdamW: Adam moment estimation with decoupled weight decay.
//!
//! The decay term is applied directly to the parameters in the update
//! step, outside the gradient moments:
//!
//! ```text
//! t <- t + 1
//! m <- b1 m + (1 - b1) g          m_hat = m / (1 - b1^t)
//! v <- b2 v + (1 - b2) g^2        v_hat = v / (1 - b2^t)
//! theta <- theta - lr m_hat / (sqrt(v_hat) + eps) - lr wd theta
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AdamWWire", into = "AdamWWire")]
pub struct AdamW {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct AdamWWire {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl From<AdamW> for AdamWWire {
    fn from(a: AdamW) -> Self {
        AdamWWire {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            weight_decay: a.weight_decay,
            step_count: a.step_count,
            m: a.m,
            v: a.v,
        }
    }
}

impl TryFrom<AdamWWire> for AdamW {
    type Error = Error;

    fn try_from(w: AdamWWire) -> Result<Self> {
        if w.m.len() != w.v.len()
            || w.m
                .iter()
                .zip(&w.v)
                .any(|(m, v)| m.len() != v.len() || v.iter().any(|x| !x.is_finite() || *x < 0.0))
        {
            return Err(Error::InvalidArgument {
                arg: "optimizer state",
                reason: "moment arrays must align and second moments must be nonnegative"
                    .to_string(),
            });
        }
        let mut out = AdamW::with_hyperparams(
            w.lr,
            w.weight_decay,
            &w.m.iter().map(Vec::len).collect::<Vec<_>>(),
        )?;
        out.beta1 = w.beta1;
        out.beta2 = w.beta2;
        out.eps = w.eps;
        out.step_count = w.step_count;
        out.m = w.m;
        out.v = w.v;
        Ok(out)
    }
}

impl AdamW {
    pub const DEFAULT_LR: f64 = 3e-4;
    pub const DEFAULT_WEIGHT_DECAY: f64 = 0.05;

    /// Fresh optimizer state over parameter arrays of the given lengths,
    /// with zero moments and the default hyperparameters
    /// (lr 3e-4, betas 0.9/0.999, eps 1e-8, weight decay 0.05).
    pub fn new(param_lens: &[usize]) -> Self {
        AdamW::with_hyperparams(Self::DEFAULT_LR, Self::DEFAULT_WEIGHT_DECAY, param_lens)
            .expect("default hyperparameters are valid")
    }

    /// `lr = 0` is accepted and makes the step a no-op, which keeps
    /// zero-step training runs well-defined.
    pub fn with_hyperparams(lr: f64, weight_decay: f64, param_lens: &[usize]) -> Result<Self> {
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::InvalidArgument {
                arg: "lr",
                reason: format!("must be finite and nonnegative, got {lr}"),
            });
        }
        if !weight_decay.is_finite() || weight_decay < 0.0 {
            return Err(Error::InvalidArgument {
                arg: "weight_decay",
                reason: format!("must be finite and nonnegative, got {weight_decay}"),
            });
        }
        Ok(AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step_count: 0,
            m: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update over all parameter arrays. `decay` selects which
    /// arrays receive weight decay (biases are typically excluded).
    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
        decay: &[bool],
    ) -> Result<()> {
        if params.len() != self.m.len()
            || grads.len() != self.m.len()
            || decay.len() != self.m.len()
        {
            return Err(Error::ShapeMismatch {
                op: "adamw_step",
                expected: format!("{} parameter arrays", self.m.len()),
                got: format!("{}/{}/{}", params.len(), grads.len(), decay.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::ShapeMismatch {
                    op: "adamw_step",
                    expected: format!("array of length {}", m.len()),
                    got: format!("params {}, grads {}", p.len(), g.len()),
                });
            }
            if !g.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite("gradient"));
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (slot, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
            let wd = if decay[slot] { self.weight_decay } else { 0.0 };
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps) + self.lr * wd * p[i];
            }
        }
        Ok(())
    }
}
