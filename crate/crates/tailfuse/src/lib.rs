//! Training and evaluation toolkit for long-tailed classification over
//! paired feature modalities.
//!
//! The pieces, bottom to top:
//!
//! - [`numkernel`]: dense `f64` arrays, stable softmax, and a seeded
//!   portable PRNG;
//! - [`loss`]: cross-entropy and focal losses with analytic logit
//!   gradients, plus the exponential decay schedule for the focusing
//!   parameter (from 2 down to 0.1 over training by default);
//! - [`model`]: a per-modality classifier head (temporal mean pooling +
//!   two-layer perceptron) with a full backward pass;
//! - [`optim`]: AdamW with decoupled weight decay;
//! - [`data`]: a synthetic long-tailed paired-modality benchmark,
//!   16-frame clip sampling with last-frame padding, and dataset IO;
//! - [`evaluate`]: late fusion by probability averaging and the metric
//!   suite (top-k accuracy, confusion matrix, macro precision/recall/F1,
//!   head/tail F1 slices);
//! - [`cli`]: experiment orchestration behind the `tailfuse` binary
//!   (`gen`, `train`, `eval`, `gradcheck`).
//!
//! The two modality pathways are trained independently and combined only
//! at prediction time by averaging their class distributions.

pub mod cli;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod loss;
pub mod model;
pub mod numkernel;
pub mod optim;

pub use data::{
    class_counts, eval_clip, generate, sample_clip, Clip, Dataset, DatasetConfig, Modality, Sample,
};
pub use error::{Error, Result};
pub use evaluate::{
    confusion_matrix, evaluate_models, evaluate_single, late_fuse, macro_prf, metrics_report,
    tail_slice, top_k_accuracy, Confusion, FusionMode, MetricsReport,
};
pub use loss::{batch_loss, ce_loss, focal_loss, GammaSchedule, LossValue};
pub use model::{backward, forward, predict_proba, ForwardTrace, HeadGrads, HeadParams};
pub use numkernel::{argmax_first, relu, softmax, Matrix, ProbDist, Rng};
pub use optim::AdamW;
