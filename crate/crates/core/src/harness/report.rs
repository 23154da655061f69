//! Experiment reports, controller traces, and prediction exports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::TraceRecord;
use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::models::ForecastModel;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Everything a run reports. Two runs with the same config and seed produce
/// byte-identical JSON except for `wall_time_secs`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub test_mse: f64,
    pub test_mae: f64,
    /// Scale the metrics are computed on; standardization uses train-segment
    /// statistics only.
    pub metrics_scale: String,
    /// Sparsity at the end of training (the last controller trace entry).
    pub final_sparsity: f64,
    /// Sparsity of the reported (min validation loss) checkpoint.
    pub checkpoint_sparsity: f64,
    pub total_params: u64,
    pub nonzero_params: u64,
    /// Theoretical inference FLOPs over the full test segment.
    pub test_flops: u64,
    pub test_windows: u64,
    pub decisions: BTreeMap<String, u64>,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("report json: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("report parse: {e}")))
    }

    /// One-line summary for the terminal.
    pub fn summary_line(&self) -> String {
        format!(
            "test_mse={:.6} test_mae={:.6} sparsity={:.4} nonzero_params={} flops={} epochs={}",
            self.test_mse,
            self.test_mae,
            self.checkpoint_sparsity,
            self.nonzero_params,
            self.test_flops,
            self.epochs_run
        )
    }
}

pub fn write_trace_jsonl(trace: &[TraceRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    for rec in trace {
        out.push_str(
            &serde_json::to_string(rec).map_err(|e| Error::Config(format!("trace json: {e}")))?,
        );
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_trace_jsonl(path: &Path) -> Result<Vec<TraceRecord>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Config(format!("trace parse: {e}"))))
        .collect()
}

/// One exported prediction value (standardized scale). `index` counts time
/// steps from the start of the evaluated segment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionRow {
    pub index: usize,
    pub variable: String,
    pub y_true: f64,
    pub y_pred: f64,
}

/// Tile the segment with non-overlapping horizon blocks (windows taken at
/// stride H) so the rows form one continuous forecast curve per variable.
pub fn build_predictions(
    model: &ForecastModel,
    dataset: &WindowedDataset,
    columns: &[String],
    segment_start: usize,
) -> Result<Vec<PredictionRow>> {
    let horizon = dataset.horizon;
    let mut rows = Vec::new();
    for ex in dataset.examples.iter().step_by(horizon.max(1)) {
        let pred = model.forward(&ex.lookback)?;
        for h in 0..horizon {
            for (c, col) in columns.iter().enumerate() {
                rows.push(PredictionRow {
                    index: ex.target_start + h - segment_start,
                    variable: col.clone(),
                    y_true: ex.target.at(h, c),
                    y_pred: pred.at(h, c),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_predictions_csv(rows: &[PredictionRow], path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from("index,variable,y_true,y_pred\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.index, r.variable, r.y_true, r.y_pred);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}
