//! Decomposition-linear forecaster: two H x L affine maps, one over the
//! trend component and one over the seasonal residual, shared across the m
//! channels.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::decompose::series_decompose;
use crate::models::{mse_and_grad, uniform_init, DenseParam, GradSet, ModelConfig};
use crate::numerics::{matmul, Matrix, RngStream};
use crate::sparsity::SparseLayerState;

const W_SEASONAL: usize = 0;
const W_TREND: usize = 1;
const B_SEASONAL: usize = 0;
const B_TREND: usize = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DLinear {
    pub cfg: ModelConfig,
    pub sparse: Vec<SparseLayerState>,
    pub dense: Vec<DenseParam>,
}

impl DLinear {
    pub fn new(cfg: ModelConfig, rng: &mut RngStream) -> Self {
        let (l, h) = (cfg.lookback, cfg.horizon);
        let sparse = vec![
            SparseLayerState::new("seasonal", uniform_init(h, l, l, rng)),
            SparseLayerState::new("trend", uniform_init(h, l, l, rng)),
        ];
        let dense = vec![
            DenseParam::new("seasonal_bias", uniform_init(h, 1, l, rng)),
            DenseParam::new("trend_bias", uniform_init(h, 1, l, rng)),
        ];
        DLinear { cfg, sparse, dense }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let (trend, seasonal) = series_decompose(x, self.cfg.moving_avg)?;
        let mut y_seasonal = matmul(&self.sparse[W_SEASONAL].weights, &seasonal)?;
        y_seasonal.add_col_broadcast(&self.dense[B_SEASONAL].value)?;
        let mut y_trend = matmul(&self.sparse[W_TREND].weights, &trend)?;
        y_trend.add_col_broadcast(&self.dense[B_TREND].value)?;
        y_seasonal.add_assign(&y_trend)?;
        Ok(y_seasonal)
    }

    pub fn loss_grads(&self, x: &Matrix, target: &Matrix) -> Result<(f64, GradSet)> {
        let (trend, seasonal) = series_decompose(x, self.cfg.moving_avg)?;
        let pred = self.forward(x)?;
        let (loss, upstream) = mse_and_grad(&pred, target)?;
        // y = W_s s + W_t t + biases, so dW = upstream * componentT and the
        // bias grad sums over channels
        let grad_ws = matmul(&upstream, &seasonal.transpose())?;
        let grad_wt = matmul(&upstream, &trend.transpose())?;
        let grad_b = upstream.row_sums();
        Ok((
            loss,
            GradSet {
                sparse: vec![grad_ws, grad_wt],
                dense: vec![grad_b.clone(), grad_b],
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ForecastModel, ModelKind};

    fn small_cfg() -> ModelConfig {
        let mut cfg = ModelConfig::new(ModelKind::Dlinear, 8, 5, 3);
        cfg.moving_avg = 3;
        cfg
    }

    #[test]
    fn zero_weights_zero_bias_predicts_zero() {
        let mut rng = RngStream::new(4);
        let mut m = DLinear::new(small_cfg(), &mut rng);
        for l in &mut m.sparse {
            l.weights.scale_assign(0.0);
        }
        for d in &mut m.dense {
            d.value.scale_assign(0.0);
        }
        let x = Matrix::from_fn(8, 3, |r, c| (r + c) as f64);
        let y = m.forward(&x).unwrap();
        assert!(y.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_weights_recompose_the_window() {
        // with L = H, W_s = W_t = I and zero bias the decomposition identity
        // gives y = seasonal + trend = x
        let mut rng = RngStream::new(5);
        let mut cfg = ModelConfig::new(ModelKind::Dlinear, 6, 6, 2);
        cfg.moving_avg = 3;
        let mut m = DLinear::new(cfg, &mut rng);
        for l in &mut m.sparse {
            l.weights = Matrix::from_fn(6, 6, |r, c| if r == c { 1.0 } else { 0.0 });
        }
        for d in &mut m.dense {
            d.value.scale_assign(0.0);
        }
        let x = Matrix::from_fn(6, 2, |r, c| ((r * 2 + c) as f64 * 0.37).sin());
        let y = m.forward(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn output_shape_is_horizon_by_vars() {
        let mut rng = RngStream::new(6);
        let model = ForecastModel::new(small_cfg(), &mut rng).unwrap();
        let x = Matrix::from_fn(8, 3, |r, c| (r as f64 - c as f64) * 0.1);
        assert_eq!(model.forward(&x).unwrap().shape(), (5, 3));
        let bad = Matrix::zeros(7, 3);
        assert!(model.forward(&bad).is_err());
    }
}
