//! Checkpoint persistence: head parameters, optimizer state, and enough
//! metadata to resume or evaluate. Plain JSON with shortest-round-trip
//! decimal floats, so save/load preserves every value bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cli::config::LossKind;
use crate::data::Modality;
use crate::error::{Error, Result};
use crate::loss::GammaSchedule;
use crate::model::HeadParams;
use crate::optim::AdamW;

pub const CHECKPOINT_FORMAT: &str = "tailfuse-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub modality: Modality,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub class_count: usize,
    pub clip_len: usize,
    pub seed: u64,
    pub epochs: usize,
    pub loss: LossKind,
    /// The annealing schedule; absent for cross-entropy runs.
    pub schedule: Option<GammaSchedule>,
    pub params: HeadParams,
    pub optimizer: AdamW,
}

impl Checkpoint {
    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!(
                "unsupported checkpoint format `{}`",
                self.format
            )));
        }
        self.params.validate()?;
        if self.params.feature_dim() != self.feature_dim
            || self.params.hidden_dim() != self.hidden_dim
            || self.params.class_count() != self.class_count
        {
            return Err(Error::ShapeMismatch {
                op: "Checkpoint::validate",
                expected: format!(
                    "params of shape d={} h={} k={}",
                    self.feature_dim, self.hidden_dim, self.class_count
                ),
                got: format!(
                    "d={} h={} k={}",
                    self.params.feature_dim(),
                    self.params.hidden_dim(),
                    self.params.class_count()
                ),
            });
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        std::fs::write(path, json + "\n").map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}
