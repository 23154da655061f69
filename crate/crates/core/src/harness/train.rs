//! The training loop: data, model, optimizer, and controller tied together,
//! with early stopping and best-checkpoint bookkeeping.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerKind, TraceRecord};
use crate::data::{
    chronological_split, load_csv, make_windows, standardize, synth_series, Example, RawSeries,
    Scaler, Segment, Splits, WindowedDataset,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::harness::checkpoint::Checkpoint;
use crate::harness::config::ExperimentConfig;
use crate::harness::metrics;
use crate::harness::report::{
    build_predictions, write_predictions_csv, write_trace_jsonl, EpochRecord, ExperimentReport,
    PredictionRow,
};
use crate::models::{count_flops, count_params, ForecastModel, GradSet};
use crate::numerics::{adam_step, AdamState, RngStream};
use crate::sparsity::{init_mask, snapshot};

/// Windowed segments plus everything needed to rebuild or export them.
pub struct PreparedData {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
    pub scaler: Scaler,
    pub columns: Vec<String>,
    pub splits: Splits,
}

impl PreparedData {
    pub fn vars(&self) -> usize {
        self.train.vars
    }

    pub fn segment(&self, which: Segment) -> &WindowedDataset {
        match which {
            Segment::Train => &self.train,
            Segment::Val => &self.val,
            Segment::Test => &self.test,
        }
    }

    pub fn segment_start(&self, which: Segment) -> usize {
        match which {
            Segment::Train => self.splits.train.start,
            Segment::Val => self.splits.val.start,
            Segment::Test => self.splits.test.start,
        }
    }
}

fn load_raw(cfg: &ExperimentConfig) -> Result<RawSeries> {
    let raw = if let Some(path) = &cfg.dataset {
        load_csv(path, cfg.date_column.as_deref())?
    } else if let Some(synth) = &cfg.synth {
        synth_series(
            synth.seed.unwrap_or(cfg.seed),
            synth.t,
            synth.m,
            synth.period,
            synth.trend,
            synth.noise,
        )
    } else {
        return Err(Error::Config("no dataset or synth section".into()));
    };
    Ok(if cfg.univariate { raw.last_variable() } else { raw })
}

/// Load, split, standardize (train statistics only), and window the data.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let raw = load_raw(cfg)?;
    let splits = chronological_split(raw.len(), &cfg.split_spec())?;
    let (scaled, scaler) = standardize(&raw.values, &splits.train)?;
    prepare_windows(cfg, &raw, scaled, scaler, splits)
}

/// Same pipeline but with a frozen scaler from a checkpoint.
pub fn prepare_data_with_scaler(cfg: &ExperimentConfig, scaler: &Scaler) -> Result<PreparedData> {
    let raw = load_raw(cfg)?;
    if raw.vars() != scaler.means.len() {
        return Err(Error::Checkpoint(format!(
            "dataset has {} variables but the checkpoint scaler expects {}",
            raw.vars(),
            scaler.means.len()
        )));
    }
    let splits = chronological_split(raw.len(), &cfg.split_spec())?;
    let scaled = scaler.scale(&raw.values);
    prepare_windows(cfg, &raw, scaled, scaler.clone(), splits)
}

fn prepare_windows(
    cfg: &ExperimentConfig,
    raw: &RawSeries,
    scaled: crate::numerics::Matrix,
    scaler: Scaler,
    splits: Splits,
) -> Result<PreparedData> {
    let (l, h) = (cfg.model.lookback, cfg.model.horizon);
    let train = make_windows(&scaled, splits.train.clone(), Segment::Train, l, h, &scaler)?;
    let val = make_windows(&scaled, splits.val.clone(), Segment::Val, l, h, &scaler)?;
    let test = make_windows(&scaled, splits.test.clone(), Segment::Test, l, h, &scaler)?;
    Ok(PreparedData {
        train,
        val,
        test,
        scaler,
        columns: raw.columns.clone(),
        splits,
    })
}

/// Mean loss and mean parameter gradients over a batch of examples.
/// Per-example work fans out via the exec helpers; the reduction is a
/// sequential fold in example order, so results are bit-stable.
pub fn batch_grads(
    model: &ForecastModel,
    examples: &[Example],
    idxs: &[usize],
) -> Result<(f64, GradSet)> {
    let results = exec::map_indexed(idxs.len(), |i| {
        let ex = &examples[idxs[i]];
        model.loss_grads(&ex.lookback, &ex.target)
    });
    reduce_batch(results)
}

/// Sequential twin of [`batch_grads`]; the benchmark baseline.
pub fn batch_grads_seq(
    model: &ForecastModel,
    examples: &[Example],
    idxs: &[usize],
) -> Result<(f64, GradSet)> {
    let results = exec::map_indexed_seq(idxs.len(), |i| {
        let ex = &examples[idxs[i]];
        model.loss_grads(&ex.lookback, &ex.target)
    });
    reduce_batch(results)
}

fn reduce_batch(results: Vec<Result<(f64, GradSet)>>) -> Result<(f64, GradSet)> {
    let n = results.len();
    assert!(n > 0, "empty batch");
    let mut iter = results.into_iter();
    let (mut loss, mut grads) = iter.next().unwrap()?;
    for r in iter {
        let (l, g) = r?;
        loss += l;
        grads.add_assign(&g)?;
    }
    let inv = 1.0 / n as f64;
    grads.scale_assign(inv);
    Ok((loss * inv, grads))
}

/// Mean MSE and MAE over a window set (chronological order).
pub fn evaluate_windows(model: &ForecastModel, examples: &[Example]) -> Result<(f64, f64)> {
    let results = exec::map_indexed(examples.len(), |i| {
        let ex = &examples[i];
        let pred = model.forward(&ex.lookback)?;
        Ok((
            metrics::mse(&pred, &ex.target)?,
            metrics::mae(&pred, &ex.target)?,
        ))
    });
    reduce_metrics(results)
}

/// Sequential twin of [`evaluate_windows`]; the benchmark baseline.
pub fn evaluate_windows_seq(model: &ForecastModel, examples: &[Example]) -> Result<(f64, f64)> {
    let results = exec::map_indexed_seq(examples.len(), |i| {
        let ex = &examples[i];
        let pred = model.forward(&ex.lookback)?;
        Ok((
            metrics::mse(&pred, &ex.target)?,
            metrics::mae(&pred, &ex.target)?,
        ))
    });
    reduce_metrics(results)
}

fn reduce_metrics(results: Vec<Result<(f64, f64)>>) -> Result<(f64, f64)> {
    let n = results.len();
    if n == 0 {
        return Err(Error::Data("no windows to evaluate".into()));
    }
    let mut mse = 0.0;
    let mut mae = 0.0;
    for r in results {
        let (a, b) = r?;
        mse += a;
        mae += b;
    }
    Ok((mse / n as f64, mae / n as f64))
}

/// Validation loss for the controller; `val_batches` limits the evaluation
/// to a chronological prefix for speed.
fn controller_val_loss(
    model: &ForecastModel,
    val: &WindowedDataset,
    val_batches: Option<usize>,
    batch_size: usize,
) -> Result<f64> {
    let limit = match val_batches {
        Some(k) => (k * batch_size).clamp(1, val.len()),
        None => val.len(),
    };
    let (mse, _) = evaluate_windows(model, &val.examples[..limit])?;
    Ok(mse)
}

/// Per-parameter Adam states for one model.
pub(crate) struct Optimizer {
    sparse: Vec<AdamState>,
    dense: Vec<AdamState>,
}

impl Optimizer {
    pub(crate) fn new(model: &ForecastModel, lr: f64) -> Self {
        let state_for = |shape: (usize, usize)| AdamState::new(shape.0, shape.1, lr);
        Optimizer {
            sparse: model
                .sparse_layers()
                .iter()
                .map(|l| state_for(l.weights.shape()))
                .collect(),
            dense: model
                .dense_params()
                .iter()
                .map(|p| state_for(p.value.shape()))
                .collect(),
        }
    }

    /// Adam-update every parameter, re-zero masked weights, and stash the
    /// batch gradient as each layer's growth signal.
    pub(crate) fn step(&mut self, model: &mut ForecastModel, grads: &GradSet) -> Result<()> {
        let layers = model.sparse_layers_mut();
        for (i, layer) in layers.iter_mut().enumerate() {
            adam_step(
                &mut layer.weights,
                &grads.sparse[i],
                &mut self.sparse[i],
                &layer.name,
            )?;
            layer.apply_mask();
            layer.last_grad = grads.sparse[i].clone();
        }
        for (i, param) in model.dense_params_mut().iter_mut().enumerate() {
            adam_step(
                &mut param.value,
                &grads.dense[i],
                &mut self.dense[i],
                &param.name,
            )?;
        }
        Ok(())
    }

    pub(crate) fn sparse_states_mut(&mut self) -> &mut [AdamState] {
        &mut self.sparse
    }
}

pub struct TrainOutcome {
    pub report: ExperimentReport,
    pub trace: Vec<TraceRecord>,
    pub checkpoint: Checkpoint,
    pub predictions: Vec<PredictionRow>,
}

/// Train a model per the config and return the report, the controller trace,
/// the best (min validation loss) checkpoint, and test-segment predictions.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let mut rng = RngStream::new(cfg.seed);
    let mut model = ForecastModel::new(cfg.model_config(data.vars()), &mut rng)?;
    let mut controller = cfg.build_controller()?;

    let density = controller.initial_density();
    if density < 1.0 {
        for layer in model.sparse_layers_mut() {
            let (r, c) = layer.weights.shape();
            layer.mask = init_mask(r, c, density, &mut rng)?;
            layer.apply_mask();
        }
    }

    let mut opt = Optimizer::new(&model, cfg.lr);
    let n_train = data.train.len();
    let batches_per_epoch = n_train.div_ceil(cfg.batch_size);
    let t_max = (cfg.epochs * batches_per_epoch) as u64;
    let mut step: u64 = 0;

    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut decisions: BTreeMap<String, u64> = BTreeMap::new();
    let mut epoch_records: Vec<EpochRecord> = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_model: Option<ForecastModel> = None;
    let mut epochs_without_improvement = 0usize;
    let mut order: Vec<usize> = (0..n_train).collect();

    'training: for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            rng.shuffle(&mut order);
        }
        let mut train_loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_grads(&model, &data.train.examples, chunk)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at step {step} (epoch {epoch}); try a lower learning rate"
                )));
            }
            opt.step(&mut model, &grads)?;
            step += 1;

            if let Some(period) = controller.update_period() {
                if step.is_multiple_of(period) {
                    let l_valid =
                        controller_val_loss(&model, &data.val, cfg.val_batches, cfg.batch_size)?;
                    let rec = controller.update(
                        step,
                        t_max,
                        l_valid,
                        model.sparse_layers_mut(),
                        Some(opt.sparse_states_mut()),
                    )?;
                    *decisions.entry(rec.decision.clone()).or_insert(0) += 1;
                    trace.push(rec);
                }
            }
            train_loss_sum += loss;
        }

        let (val_loss, _) = evaluate_windows(&model, &data.val.examples)?;
        if controller.kind() == ControllerKind::Dense {
            // dense runs still log a per-epoch trace entry so sparsity
            // curves exist for every controller
            let rec = controller.update(step, t_max, val_loss, model.sparse_layers_mut(), None)?;
            *decisions.entry(rec.decision.clone()).or_insert(0) += 1;
            trace.push(rec);
        }
        epoch_records.push(EpochRecord {
            epoch,
            train_loss: train_loss_sum / batches_per_epoch as f64,
            val_loss,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_model = Some(model.clone());
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= cfg.patience {
                break 'training;
            }
        }
    }

    let best = best_model.unwrap_or_else(|| model.clone());
    let (test_mse, test_mae) = evaluate_windows(&best, &data.test.examples)?;
    let final_sparsity = snapshot(model.sparse_layers())?.global_sparsity;
    let checkpoint_sparsity = snapshot(best.sparse_layers())?.global_sparsity;
    let predictions = build_predictions(
        &best,
        &data.test,
        &data.columns,
        data.segment_start(Segment::Test),
    )?;

    let report = ExperimentReport {
        config: cfg.clone(),
        epochs_run: epoch_records.len(),
        best_epoch,
        best_val_loss: best_val,
        epochs: epoch_records,
        test_mse,
        test_mae,
        metrics_scale: "standardized".into(),
        final_sparsity,
        checkpoint_sparsity,
        total_params: count_params(&best, false),
        nonzero_params: count_params(&best, true),
        test_flops: count_flops(&best, data.test.len() as u64),
        test_windows: data.test.len() as u64,
        decisions,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let checkpoint = Checkpoint::new(cfg.clone(), best, data.scaler.clone());

    Ok(TrainOutcome {
        report,
        trace,
        checkpoint,
        predictions,
    })
}

/// Metrics, FLOPs and parameter counts of a checkpoint on one data segment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalSummary {
    pub segment: Segment,
    pub windows: u64,
    pub mse: f64,
    pub mae: f64,
    pub total_params: u64,
    pub nonzero_params: u64,
    pub flops: u64,
}

/// Evaluate a checkpoint on a segment, optionally pointing it at a different
/// dataset file. The checkpoint's scaler is reused, never refitted.
pub fn evaluate_checkpoint(
    ckpt: &Checkpoint,
    dataset_override: Option<&Path>,
    segment: Segment,
) -> Result<EvalSummary> {
    let mut cfg = ckpt.config.clone();
    if let Some(path) = dataset_override {
        cfg.dataset = Some(path.to_path_buf());
        cfg.synth = None;
    }
    let data = prepare_data_with_scaler(&cfg, &ckpt.scaler)?;
    let model_cfg = ckpt.model.config();
    if model_cfg.vars != data.vars() {
        return Err(Error::Checkpoint(format!(
            "model expects {} variables, dataset has {}",
            model_cfg.vars,
            data.vars()
        )));
    }
    let ds = data.segment(segment);
    let (mse, mae) = evaluate_windows(&ckpt.model, &ds.examples)?;
    Ok(EvalSummary {
        segment,
        windows: ds.len() as u64,
        mse,
        mae,
        total_params: count_params(&ckpt.model, false),
        nonzero_params: count_params(&ckpt.model, true),
        flops: count_flops(&ckpt.model, ds.len() as u64),
    })
}

/// Write report.json, trace.jsonl, predictions.csv, and checkpoint.json.
pub fn write_outputs(outdir: &Path, outcome: &TrainOutcome) -> Result<()> {
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir.display().to_string(), e))?;
    outcome.report.save(&outdir.join("report.json"))?;
    write_trace_jsonl(&outcome.trace, &outdir.join("trace.jsonl"))?;
    write_predictions_csv(&outcome.predictions, &outdir.join("predictions.csv"))?;
    outcome.checkpoint.save(&outdir.join("checkpoint.json"))?;
    Ok(())
}
