//! MLP forecaster over the flattened look-back window.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::{mse_and_grad, uniform_init, DenseParam, GradSet, ModelConfig};
use crate::numerics::ops::{affine_backward, affine_forward, relu_backward, relu_forward};
use crate::numerics::{Matrix, RngStream};
use crate::sparsity::SparseLayerState;

/// Flattened L*m input -> hidden layers with relu -> H*m output. An empty
/// hidden list degenerates to a single affine map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    pub cfg: ModelConfig,
    pub sparse: Vec<SparseLayerState>,
    pub dense: Vec<DenseParam>,
}

impl Mlp {
    pub fn new(cfg: ModelConfig, rng: &mut RngStream) -> Self {
        let in_dim = cfg.lookback * cfg.vars;
        let out_dim = cfg.horizon * cfg.vars;
        let mut dims = vec![in_dim];
        dims.extend(cfg.hidden.iter().copied());
        dims.push(out_dim);
        let mut sparse = Vec::new();
        let mut dense = Vec::new();
        for i in 0..dims.len() - 1 {
            let (d_in, d_out) = (dims[i], dims[i + 1]);
            sparse.push(SparseLayerState::new(
                format!("fc{i}"),
                uniform_init(d_in, d_out, d_in, rng),
            ));
            dense.push(DenseParam::new(
                format!("fc{i}_bias"),
                uniform_init(1, d_out, d_in, rng),
            ));
        }
        Mlp { cfg, sparse, dense }
    }

    fn flat_input(&self, x: &Matrix) -> Result<Matrix> {
        x.reshaped(1, self.cfg.lookback * self.cfg.vars)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = self.flat_input(x)?;
        let last = self.sparse.len() - 1;
        for i in 0..=last {
            h = affine_forward(&h, &self.sparse[i].weights, &self.dense[i].value)?;
            if i != last {
                h = relu_forward(&h);
            }
        }
        h.reshaped(self.cfg.horizon, self.cfg.vars)
    }

    pub fn loss_grads(&self, x: &Matrix, target: &Matrix) -> Result<(f64, GradSet)> {
        let last = self.sparse.len() - 1;
        // forward, caching pre-activations and layer inputs
        let mut inputs = Vec::with_capacity(last + 1);
        let mut pre_acts = Vec::with_capacity(last);
        let mut h = self.flat_input(x)?;
        for i in 0..=last {
            inputs.push(h.clone());
            h = affine_forward(&h, &self.sparse[i].weights, &self.dense[i].value)?;
            if i != last {
                pre_acts.push(h.clone());
                h = relu_forward(&h);
            }
        }
        let pred = h.reshaped(self.cfg.horizon, self.cfg.vars)?;
        let (loss, upstream) = mse_and_grad(&pred, target)?;

        let mut grad_w = vec![Matrix::zeros(0, 0); last + 1];
        let mut grad_b = vec![Matrix::zeros(0, 0); last + 1];
        let mut up = upstream.reshaped(1, self.cfg.horizon * self.cfg.vars)?;
        for i in (0..=last).rev() {
            let (gx, gw, gb) = affine_backward(&inputs[i], &self.sparse[i].weights, &up)?;
            grad_w[i] = gw;
            grad_b[i] = gb;
            if i > 0 {
                up = relu_backward(&pre_acts[i - 1], &gx)?;
            }
        }
        Ok((
            loss,
            GradSet {
                sparse: grad_w,
                dense: grad_b,
            },
        ))
    }
}
