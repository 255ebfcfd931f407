//! Experiment orchestration: dataset generation, per-modality training,
//! fused evaluation, and the gradient self-check, as called by the
//! `tailfuse` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod gradcheck;
pub mod train;

pub use checkpoint::Checkpoint;
pub use commands::{
    cmd_eval, cmd_gen, cmd_train, DatasetManifest, EvalOutputs, GenOutputs, ReportFile,
    RunManifest, Split, TrainOutputs,
};
pub use config::{ExperimentConfig, LossKind, PartialConfig, OUTPUT_DIR_ENV};
pub use gradcheck::{run_gradcheck, GradcheckReport};
pub use train::{derive_modality_seed, train_modality, EpochLog, TrainOutcome};
