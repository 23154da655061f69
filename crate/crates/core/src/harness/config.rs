//! Experiment configuration: a TOML file with CLI overrides on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controllers::{
    Controller, ControllerKind, ControllerState, GmpConfig, GranetConfig, PalsConfig, RiglConfig,
};
use crate::data::SplitSpec;
use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelKind};

/// Parameters of the synthetic sine + trend + noise generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    pub t: usize,
    #[serde(default = "default_synth_vars")]
    pub m: usize,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub trend: f64,
    #[serde(default)]
    pub noise: f64,
    /// Generator seed; defaults to the experiment seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_synth_vars() -> usize {
    1
}

fn default_period() -> f64 {
    24.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub lookback: usize,
    pub horizon: usize,
    pub hidden: Vec<usize>,
    pub d_model: usize,
    pub d_ff: usize,
    pub moving_avg: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: ModelKind::Dlinear,
            lookback: 96,
            horizon: 96,
            hidden: vec![64],
            d_model: 32,
            d_ff: 64,
            moving_avg: 25,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    pub gamma: f64,
    pub lambda: f64,
    pub zeta0: f64,
    pub delta_t: u64,
    pub s_min: f64,
    pub s_max: f64,
    pub d_init: f64,
    /// Final sparsity for gmp/granet, fixed sparsity for rigl.
    pub target_sparsity: f64,
    /// Fraction of training at which the gradual-pruning ramp ends.
    pub prune_end_frac: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection {
            kind: ControllerKind::Dense,
            gamma: 1.2,
            lambda: 1.1,
            zeta0: 0.5,
            delta_t: 20,
            s_min: 0.2,
            s_max: 0.9,
            d_init: 1.0,
            target_sparsity: 0.5,
            prune_end_frac: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    pub date_column: Option<String>,
    pub univariate: bool,
    pub ett_mode: bool,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    /// Validation batches used for the controller's loss; None = full set.
    pub val_batches: Option<usize>,
    pub shuffle: bool,
    pub model: ModelSection,
    pub controller: ControllerSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            dataset: None,
            synth: None,
            date_column: None,
            univariate: false,
            ett_mode: false,
            seed: 42,
            epochs: 10,
            batch_size: 32,
            lr: 1e-4,
            patience: 3,
            val_batches: None,
            shuffle: false,
            model: ModelSection::default(),
            controller: ControllerSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.dataset.is_none() && self.synth.is_none() {
            return Err(Error::Config(
                "config needs either `dataset` or a [synth] section".into(),
            ));
        }
        if self.controller.kind == ControllerKind::Pals {
            self.pals_config().validate()?;
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        if self.ett_mode {
            SplitSpec::ett()
        } else {
            SplitSpec::default()
        }
    }

    pub fn model_config(&self, vars: usize) -> ModelConfig {
        ModelConfig {
            kind: self.model.kind,
            lookback: self.model.lookback,
            horizon: self.model.horizon,
            vars,
            hidden: self.model.hidden.clone(),
            d_model: self.model.d_model,
            d_ff: self.model.d_ff,
            moving_avg: self.model.moving_avg,
        }
    }

    fn pals_config(&self) -> PalsConfig {
        PalsConfig {
            gamma: self.controller.gamma,
            lambda: self.controller.lambda,
            zeta0: self.controller.zeta0,
            delta_t: self.controller.delta_t,
            s_min: self.controller.s_min,
            s_max: self.controller.s_max,
            d_init: self.controller.d_init,
        }
    }

    pub fn build_controller(&self) -> Result<Controller> {
        let c = &self.controller;
        Ok(match c.kind {
            ControllerKind::Dense => Controller::Dense,
            ControllerKind::Pals => {
                let cfg = self.pals_config();
                cfg.validate()?;
                Controller::Pals {
                    state: ControllerState::new(1.0 - cfg.d_init),
                    cfg,
                }
            }
            ControllerKind::Gmp => Controller::Gmp {
                cfg: GmpConfig {
                    s_initial: 0.0,
                    s_final: c.target_sparsity,
                    prune_end_frac: c.prune_end_frac,
                    delta_t: c.delta_t,
                },
            },
            ControllerKind::Granet => Controller::Granet {
                cfg: GranetConfig {
                    gmp: GmpConfig {
                        s_initial: 0.0,
                        s_final: c.target_sparsity,
                        prune_end_frac: c.prune_end_frac,
                        delta_t: c.delta_t,
                    },
                    zeta0: c.zeta0,
                },
            },
            ControllerKind::Rigl => Controller::Rigl {
                cfg: RiglConfig {
                    sparsity: c.target_sparsity,
                    zeta0: c.zeta0,
                    delta_t: c.delta_t,
                },
            },
        })
    }
}
