//! Forecasting model substrates: forward/backward passes and the list of
//! sparsifiable weight matrices.
//!
//! Every model maps an L x m look-back window to an H x m prediction. The
//! sparsifiable set is exactly the affine weight matrices; biases, norm
//! parameters and positional embeddings stay dense.

pub mod decompose;
mod dlinear;
mod mlp;
mod transformer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};
use crate::sparsity::SparseLayerState;

pub use decompose::series_decompose;
pub use dlinear::DLinear;
pub use mlp::Mlp;
pub use transformer::MiniTransformer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dlinear,
    Mlp,
    MiniTransformer,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Dlinear => "dlinear",
            ModelKind::Mlp => "mlp",
            ModelKind::MiniTransformer => "mini_transformer",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dlinear" => Ok(ModelKind::Dlinear),
            "mlp" => Ok(ModelKind::Mlp),
            "mini_transformer" | "transformer" => Ok(ModelKind::MiniTransformer),
            other => Err(Error::Config(format!(
                "unknown model {other:?} (expected dlinear|mlp|mini_transformer)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub lookback: usize,
    pub horizon: usize,
    pub vars: usize,
    /// Hidden layer widths (MLP only; empty means a plain affine map).
    pub hidden: Vec<usize>,
    /// Encoder width and feed-forward width (mini transformer only).
    pub d_model: usize,
    pub d_ff: usize,
    /// Moving-average kernel for the decomposition (DLinear only). Odd.
    pub moving_avg: usize,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, lookback: usize, horizon: usize, vars: usize) -> Self {
        ModelConfig {
            kind,
            lookback,
            horizon,
            vars,
            hidden: vec![64],
            d_model: 32,
            d_ff: 64,
            moving_avg: 25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback < 1 || self.horizon < 1 || self.vars < 1 {
            return Err(Error::Config(
                "lookback, horizon and variable count must be >= 1".into(),
            ));
        }
        if self.kind == ModelKind::Dlinear && self.moving_avg.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "moving_avg kernel must be odd (got {})",
                self.moving_avg
            )));
        }
        if self.kind == ModelKind::MiniTransformer && (self.d_model < 1 || self.d_ff < 1) {
            return Err(Error::Config("d_model and d_ff must be >= 1".into()));
        }
        Ok(())
    }
}

/// A dense (non-sparsifiable) parameter: biases, norm scales, positions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenseParam {
    pub name: String,
    pub value: Matrix,
}

impl DenseParam {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        DenseParam {
            name: name.into(),
            value,
        }
    }
}

/// Per-example gradients, aligned index-for-index with a model's sparse
/// layers and dense parameters.
#[derive(Clone, Debug)]
pub struct GradSet {
    pub sparse: Vec<Matrix>,
    pub dense: Vec<Matrix>,
}

impl GradSet {
    pub fn add_assign(&mut self, other: &GradSet) -> Result<()> {
        for (a, b) in self.sparse.iter_mut().zip(other.sparse.iter()) {
            a.add_assign(b)?;
        }
        for (a, b) in self.dense.iter_mut().zip(other.dense.iter()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale_assign(&mut self, s: f64) {
        for m in &mut self.sparse {
            m.scale_assign(s);
        }
        for m in &mut self.dense {
            m.scale_assign(s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.sparse.iter().all(Matrix::all_finite) && self.dense.iter().all(Matrix::all_finite)
    }
}

/// PyTorch-style uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
pub(crate) fn uniform_init(rows: usize, cols: usize, fan_in: usize, rng: &mut RngStream) -> Matrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.uniform(-bound, bound))
}

/// MSE loss over all H*m entries plus its gradient wrt the prediction.
pub(crate) fn mse_and_grad(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::dimension(
            "loss",
            format!("prediction {:?} vs target {:?}", pred.shape(), target.shape()),
        ));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let g = grad.data_mut();
    for (i, (p, t)) in pred.data().iter().zip(target.data().iter()).enumerate() {
        let d = p - t;
        loss += d * d;
        g[i] = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ForecastModel {
    Dlinear(DLinear),
    Mlp(Mlp),
    MiniTransformer(MiniTransformer),
}

impl ForecastModel {
    pub fn new(cfg: ModelConfig, rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.kind {
            ModelKind::Dlinear => ForecastModel::Dlinear(DLinear::new(cfg, rng)),
            ModelKind::Mlp => ForecastModel::Mlp(Mlp::new(cfg, rng)),
            ModelKind::MiniTransformer => {
                ForecastModel::MiniTransformer(MiniTransformer::new(cfg, rng))
            }
        })
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            ForecastModel::Dlinear(m) => &m.cfg,
            ForecastModel::Mlp(m) => &m.cfg,
            ForecastModel::MiniTransformer(m) => &m.cfg,
        }
    }

    /// Predict an H x m horizon from an L x m look-back window.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        match self {
            ForecastModel::Dlinear(m) => m.forward(x),
            ForecastModel::Mlp(m) => m.forward(x),
            ForecastModel::MiniTransformer(m) => m.forward(x),
        }
    }

    /// Per-example loss and full parameter gradients. Gradients are dense:
    /// masked-out weight positions receive real gradients so the growth
    /// criterion can see them.
    pub fn loss_grads(&self, x: &Matrix, target: &Matrix) -> Result<(f64, GradSet)> {
        self.check_input(x)?;
        match self {
            ForecastModel::Dlinear(m) => m.loss_grads(x, target),
            ForecastModel::Mlp(m) => m.loss_grads(x, target),
            ForecastModel::MiniTransformer(m) => m.loss_grads(x, target),
        }
    }

    pub fn sparse_layers(&self) -> &[SparseLayerState] {
        match self {
            ForecastModel::Dlinear(m) => &m.sparse,
            ForecastModel::Mlp(m) => &m.sparse,
            ForecastModel::MiniTransformer(m) => &m.sparse,
        }
    }

    pub fn sparse_layers_mut(&mut self) -> &mut [SparseLayerState] {
        match self {
            ForecastModel::Dlinear(m) => &mut m.sparse,
            ForecastModel::Mlp(m) => &mut m.sparse,
            ForecastModel::MiniTransformer(m) => &mut m.sparse,
        }
    }

    pub fn dense_params(&self) -> &[DenseParam] {
        match self {
            ForecastModel::Dlinear(m) => &m.dense,
            ForecastModel::Mlp(m) => &m.dense,
            ForecastModel::MiniTransformer(m) => &m.dense,
        }
    }

    pub fn dense_params_mut(&mut self) -> &mut [DenseParam] {
        match self {
            ForecastModel::Dlinear(m) => &mut m.dense,
            ForecastModel::Mlp(m) => &mut m.dense,
            ForecastModel::MiniTransformer(m) => &mut m.dense,
        }
    }

    pub fn apply_masks(&mut self) {
        for layer in self.sparse_layers_mut() {
            layer.apply_mask();
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        let cfg = self.config();
        if x.shape() != (cfg.lookback, cfg.vars) {
            return Err(Error::dimension(
                "forward",
                format!(
                    "input {:?} but model expects {}x{}",
                    x.shape(),
                    cfg.lookback,
                    cfg.vars
                ),
            ));
        }
        Ok(())
    }
}

/// Total (or mask-respecting nonzero) parameter count: sparsifiable layers
/// plus all dense auxiliaries.
pub fn count_params(model: &ForecastModel, nonzero_only: bool) -> u64 {
    let sparse: u64 = model
        .sparse_layers()
        .iter()
        .map(|l| {
            if nonzero_only {
                l.active_count() as u64
            } else {
                l.param_count() as u64
            }
        })
        .sum();
    let dense: u64 = model.dense_params().iter().map(|p| p.value.len() as u64).sum();
    sparse + dense
}

/// Theoretical inference FLOPs for `n_samples` forward passes. Affine maps
/// count 2 * active-multiplies (respecting the mask) per application;
/// attention scores, softmax and the attention-value product are charged at
/// dense cost; elementwise work (relu, norms, residuals, decomposition) is
/// not counted.
pub fn count_flops(model: &ForecastModel, n_samples: u64) -> u64 {
    per_sample_flops(model) * n_samples
}

fn per_sample_flops(model: &ForecastModel) -> u64 {
    let active = |i: usize| model.sparse_layers()[i].active_count() as u64;
    let cfg = model.config();
    match model {
        ForecastModel::Dlinear(_) => {
            // each branch multiplies an H x L weight into every channel
            2 * cfg.vars as u64 * (active(0) + active(1))
        }
        ForecastModel::Mlp(m) => (0..m.sparse.len()).map(|i| 2 * active(i)).sum(),
        ForecastModel::MiniTransformer(m) => {
            let len = cfg.lookback as u64;
            let d = cfg.d_model as u64;
            let affine: u64 = [
                transformer::W_INPUT,
                transformer::W_QUERY,
                transformer::W_KEY,
                transformer::W_VALUE,
                transformer::W_ATTN_OUT,
                transformer::W_FFN_UP,
                transformer::W_FFN_DOWN,
            ]
            .iter()
            .map(|&i| 2 * len * active(i))
            .sum();
            let readout = 2 * active(transformer::W_READOUT);
            // scores + softmax + attention-value product, dense
            let attention = 2 * d * len * len + 5 * len * len + 2 * d * len * len;
            let _ = &m.sparse;
            affine + readout + attention
        }
    }
}
