//! Versioned JSON checkpoints: experiment config, model parameters, masks,
//! and the scaler.
//!
//! serde_json prints f64 values with the shortest representation that parses
//! back to the same bits, so a save/load cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::models::ForecastModel;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ExperimentConfig,
    pub model: ForecastModel,
    pub scaler: Scaler,
}

impl Checkpoint {
    pub fn new(config: ExperimentConfig, model: ForecastModel, scaler: Scaler) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config,
            model,
            scaler,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        for layer in self.model.sparse_layers() {
            if !layer.weights.all_finite() {
                return Err(Error::NonFinite(format!("checkpoint layer {}", layer.name)));
            }
        }
        let json = serde_json::to_string(self)
            .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {})",
                ckpt.version, CHECKPOINT_VERSION
            )));
        }
        Ok(ckpt)
    }
}
