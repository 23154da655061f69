//! sparsecast: a dynamic sparse training engine and benchmark harness for
//! small time series forecasting models.
//!
//! The crate trains hand-backpropagated forecasters (DLinear-style
//! decomposition model, an MLP, a one-layer transformer encoder) while a
//! sparsity controller rewires their weight masks during training. The PALS
//! controller tunes the sparsity level automatically by deciding at each mask
//! update whether to shrink, expand, or keep the connectivity stable based on
//! validation loss; GMP, GraNet, and RigL are included as fixed-schedule
//! baselines. A CLI (`train`, `evaluate`, `sweep`, `synth`) runs experiments
//! from TOML configs and emits JSON reports, JSONL controller traces, and
//! prediction CSVs.

pub mod controllers;
pub mod data;
pub mod error;
pub mod exec;
pub mod harness;
pub mod models;
pub mod numerics;
pub mod sparsity;

pub use error::{Error, Result};
