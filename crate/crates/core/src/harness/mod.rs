//! Experiment harness: configuration, training loop, metrics, checkpoints,
//! reports, and the CLI.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod metrics;
pub mod report;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::{ControllerSection, ExperimentConfig, ModelSection, SynthSpec};
pub use metrics::{mae, mse};
pub use report::{EpochRecord, ExperimentReport, PredictionRow};
pub use train::{
    batch_grads, batch_grads_seq, evaluate_checkpoint, evaluate_windows, evaluate_windows_seq,
    prepare_data, train, write_outputs, EvalSummary, PreparedData, TrainOutcome,
};
