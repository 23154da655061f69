//! Shared helpers for the integration tests.
//!
//! Each test binary compiles this module separately and uses a different
//! subset of it.
#![allow(dead_code)]

use std::path::PathBuf;

use sparsecast::harness::{mse, ExperimentConfig, ExperimentReport};
use sparsecast::models::{ForecastModel, ModelConfig, ModelKind};
use sparsecast::numerics::{Matrix, RngStream};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// Relative error with a floor so near-zero gradients compare absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Loss of a model on one example, through the forward path only. This is
/// the independent oracle side: it never touches the backward code.
pub fn forward_loss(model: &ForecastModel, x: &Matrix, y: &Matrix) -> f64 {
    mse(&model.forward(x).unwrap(), y).unwrap()
}

/// Check every parameter gradient (sparse and dense) of `model` against
/// central finite differences of the forward-only loss. Returns the max
/// relative error observed.
pub fn model_gradcheck(model: &ForecastModel, x: &Matrix, y: &Matrix) -> f64 {
    let (_, grads) = model.loss_grads(x, y).unwrap();
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();

    let n_sparse = model.sparse_layers().len();
    for li in 0..n_sparse {
        let n = model.sparse_layers()[li].weights.len();
        for flat in 0..n {
            let orig = model.sparse_layers()[li].weights.data()[flat];
            probe.sparse_layers_mut()[li].weights.data_mut()[flat] = orig + FD_STEP;
            let up = forward_loss(&probe, x, y);
            probe.sparse_layers_mut()[li].weights.data_mut()[flat] = orig - FD_STEP;
            let down = forward_loss(&probe, x, y);
            probe.sparse_layers_mut()[li].weights.data_mut()[flat] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grads.sparse[li].data()[flat], numeric));
        }
    }
    let n_dense = model.dense_params().len();
    for pi in 0..n_dense {
        let n = model.dense_params()[pi].value.len();
        for flat in 0..n {
            let orig = model.dense_params()[pi].value.data()[flat];
            probe.dense_params_mut()[pi].value.data_mut()[flat] = orig + FD_STEP;
            let up = forward_loss(&probe, x, y);
            probe.dense_params_mut()[pi].value.data_mut()[flat] = orig - FD_STEP;
            let down = forward_loss(&probe, x, y);
            probe.dense_params_mut()[pi].value.data_mut()[flat] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grads.dense[pi].data()[flat], numeric));
        }
    }
    worst
}

/// A random small model configuration of the given kind.
pub fn random_small_config(kind: ModelKind, rng: &mut RngStream) -> ModelConfig {
    let lookback = rng.below(12) + 4;
    let horizon = rng.below(6) + 1;
    let vars = rng.below(3) + 1;
    let mut cfg = ModelConfig::new(kind, lookback, horizon, vars);
    match kind {
        ModelKind::Dlinear => {
            cfg.moving_avg = [1, 3, 5][rng.below(3)];
        }
        ModelKind::Mlp => {
            cfg.hidden = match rng.below(3) {
                0 => vec![],
                1 => vec![rng.below(8) + 3],
                _ => vec![rng.below(8) + 3, rng.below(6) + 2],
            };
        }
        ModelKind::MiniTransformer => {
            cfg.lookback = rng.below(4) + 2;
            cfg.d_model = [4, 8][rng.below(2)];
            cfg.d_ff = [6, 12][rng.below(2)];
        }
    }
    cfg
}

pub fn random_example(cfg: &ModelConfig, rng: &mut RngStream) -> (Matrix, Matrix) {
    let x = Matrix::from_fn(cfg.lookback, cfg.vars, |_, _| rng.normal(0.0, 1.0));
    let y = Matrix::from_fn(cfg.horizon, cfg.vars, |_, _| rng.normal(0.0, 1.0));
    (x, y)
}

/// Report JSON with the wall-time field zeroed, for byte comparisons.
pub fn canonical_report_json(report: &ExperimentReport) -> String {
    let mut report = report.clone();
    report.wall_time_secs = 0.0;
    report.to_json().unwrap()
}

/// Resolve an optional benchmark dataset. Looks in `$SPARSECAST_DATA`, then
/// `<workspace>/data/`. Returns None when the file is not present, so the
/// dataset-gated criteria can skip instead of fail.
pub fn dataset_path(name: &str) -> Option<PathBuf> {
    if let Ok(dir) = std::env::var("SPARSECAST_DATA") {
        let p = PathBuf::from(dir).join(name);
        if p.exists() {
            return Some(p);
        }
    }
    let workspace = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .parent()?
        .parent()?
        .to_path_buf();
    let p = workspace.join("data").join(name);
    p.exists().then_some(p)
}

/// The hermetic synthetic experiment shared by several tests: sine + trend,
/// T=5000, m=3, noise 0.1, DLinear.
pub fn synth_experiment(controller: &str, seed: u64) -> ExperimentConfig {
    let text = format!(
        r#"
        name = "synth-{controller}"
        seed = {seed}

        [synth]
        t = 5000
        m = 3
        period = 24.0
        trend = 0.0005
        noise = 0.1

        [model]
        kind = "dlinear"
        lookback = 96
        horizon = 24

        [controller]
        kind = "{controller}"
    "#
    );
    ExperimentConfig::from_toml_str(&text).unwrap()
}
