//! Single-layer, single-head transformer encoder for forecasting, small
//! enough to exercise attention-weight sparsification on a desk.
//!
//! Pipeline: project the L x m window to d_model, add a learned positional
//! embedding, run one encoder block (self-attention with residual + norm,
//! then a relu feed-forward with residual + norm), and project the last
//! token to the H*m horizon. All eight affine weight matrices are
//! sparsifiable; biases, norm parameters and the positional embedding stay
//! dense.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::{mse_and_grad, uniform_init, DenseParam, GradSet, ModelConfig};
use crate::numerics::ops::{
    affine_backward, affine_forward, layernorm_backward, layernorm_forward, relu_backward,
    relu_forward, softmax_backward, softmax_forward, LayerNormCache,
};
use crate::numerics::{matmul, Matrix, RngStream};
use crate::sparsity::SparseLayerState;

// sparse layer indices
pub(crate) const W_INPUT: usize = 0;
pub(crate) const W_QUERY: usize = 1;
pub(crate) const W_KEY: usize = 2;
pub(crate) const W_VALUE: usize = 3;
pub(crate) const W_ATTN_OUT: usize = 4;
pub(crate) const W_FFN_UP: usize = 5;
pub(crate) const W_FFN_DOWN: usize = 6;
pub(crate) const W_READOUT: usize = 7;

// dense parameter indices
const B_INPUT: usize = 0;
const B_QUERY: usize = 1;
const B_KEY: usize = 2;
const B_VALUE: usize = 3;
const B_ATTN_OUT: usize = 4;
const B_FFN_UP: usize = 5;
const B_FFN_DOWN: usize = 6;
const B_READOUT: usize = 7;
const POSITIONAL: usize = 8;
const LN1_SCALE: usize = 9;
const LN1_SHIFT: usize = 10;
const LN2_SCALE: usize = 11;
const LN2_SHIFT: usize = 12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MiniTransformer {
    pub cfg: ModelConfig,
    pub sparse: Vec<SparseLayerState>,
    pub dense: Vec<DenseParam>,
}

struct ForwardCache {
    embedded: Matrix,
    queries: Matrix,
    keys: Matrix,
    values: Matrix,
    attn_weights: Matrix,
    attn_mix: Matrix,
    ln1: LayerNormCache,
    block1: Matrix,
    ffn_pre: Matrix,
    ffn_hidden: Matrix,
    ln2: LayerNormCache,
    block2: Matrix,
}

impl MiniTransformer {
    pub fn new(cfg: ModelConfig, rng: &mut RngStream) -> Self {
        let (l, h, m, d, d_ff) = (cfg.lookback, cfg.horizon, cfg.vars, cfg.d_model, cfg.d_ff);
        let out = h * m;
        let sparse = vec![
            SparseLayerState::new("input_proj", uniform_init(m, d, m, rng)),
            SparseLayerState::new("attn.query", uniform_init(d, d, d, rng)),
            SparseLayerState::new("attn.key", uniform_init(d, d, d, rng)),
            SparseLayerState::new("attn.value", uniform_init(d, d, d, rng)),
            SparseLayerState::new("attn.out", uniform_init(d, d, d, rng)),
            SparseLayerState::new("ffn.up", uniform_init(d, d_ff, d, rng)),
            SparseLayerState::new("ffn.down", uniform_init(d_ff, d, d_ff, rng)),
            SparseLayerState::new("readout", uniform_init(d, out, d, rng)),
        ];
        let dense = vec![
            DenseParam::new("input_bias", uniform_init(1, d, m, rng)),
            DenseParam::new("query_bias", uniform_init(1, d, d, rng)),
            DenseParam::new("key_bias", uniform_init(1, d, d, rng)),
            DenseParam::new("value_bias", uniform_init(1, d, d, rng)),
            DenseParam::new("attn_out_bias", uniform_init(1, d, d, rng)),
            DenseParam::new("ffn_up_bias", uniform_init(1, d_ff, d, rng)),
            DenseParam::new("ffn_down_bias", uniform_init(1, d, d_ff, rng)),
            DenseParam::new("readout_bias", uniform_init(1, out, d, rng)),
            DenseParam::new("positional", Matrix::from_fn(l, d, |_, _| rng.normal(0.0, 0.02))),
            DenseParam::new("ln1_scale", Matrix::from_fn(1, d, |_, _| 1.0)),
            DenseParam::new("ln1_shift", Matrix::zeros(1, d)),
            DenseParam::new("ln2_scale", Matrix::from_fn(1, d, |_, _| 1.0)),
            DenseParam::new("ln2_shift", Matrix::zeros(1, d)),
        ];
        MiniTransformer { cfg, sparse, dense }
    }

    fn scale(&self) -> f64 {
        1.0 / (self.cfg.d_model as f64).sqrt()
    }

    fn run_forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        let w = |i: usize| &self.sparse[i].weights;
        let b = |i: usize| &self.dense[i].value;

        let mut embedded = affine_forward(x, w(W_INPUT), b(B_INPUT))?;
        embedded.add_assign(&self.dense[POSITIONAL].value)?;

        let queries = affine_forward(&embedded, w(W_QUERY), b(B_QUERY))?;
        let keys = affine_forward(&embedded, w(W_KEY), b(B_KEY))?;
        let values = affine_forward(&embedded, w(W_VALUE), b(B_VALUE))?;
        let scores = matmul(&queries, &keys.transpose())?.scaled(self.scale());
        let attn_weights = softmax_forward(&scores);
        let attn_mix = matmul(&attn_weights, &values)?;
        let attn_out = affine_forward(&attn_mix, w(W_ATTN_OUT), b(B_ATTN_OUT))?;

        let residual1 = embedded.add(&attn_out)?;
        let (mut block1, ln1) = layernorm_forward(&residual1);
        scale_shift(&mut block1, b(LN1_SCALE), b(LN1_SHIFT));

        let ffn_pre = affine_forward(&block1, w(W_FFN_UP), b(B_FFN_UP))?;
        let ffn_hidden = relu_forward(&ffn_pre);
        let ffn_out = affine_forward(&ffn_hidden, w(W_FFN_DOWN), b(B_FFN_DOWN))?;

        let residual2 = block1.add(&ffn_out)?;
        let (mut block2, ln2) = layernorm_forward(&residual2);
        scale_shift(&mut block2, b(LN2_SCALE), b(LN2_SHIFT));

        let last_token = Matrix::from_vec(
            1,
            self.cfg.d_model,
            block2.row(self.cfg.lookback - 1).to_vec(),
        )?;
        let flat = affine_forward(&last_token, w(W_READOUT), b(B_READOUT))?;
        let pred = flat.reshaped(self.cfg.horizon, self.cfg.vars)?;

        Ok((
            pred,
            ForwardCache {
                embedded,
                queries,
                keys,
                values,
                attn_weights,
                attn_mix,
                ln1,
                block1,
                ffn_pre,
                ffn_hidden,
                ln2,
                block2,
            },
        ))
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.run_forward(x)?.0)
    }

    /// Row-stochastic attention matrix for the given window (diagnostics).
    pub fn attention_weights(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.run_forward(x)?.1.attn_weights)
    }

    pub fn loss_grads(&self, x: &Matrix, target: &Matrix) -> Result<(f64, GradSet)> {
        let (pred, cache) = self.run_forward(x)?;
        let (loss, upstream) = mse_and_grad(&pred, target)?;

        let w = |i: usize| &self.sparse[i].weights;
        let b = |i: usize| &self.dense[i].value;
        let len = self.cfg.lookback;
        let d = self.cfg.d_model;

        let mut grad_sparse = vec![Matrix::zeros(0, 0); self.sparse.len()];
        let mut grad_dense = vec![Matrix::zeros(0, 0); self.dense.len()];

        // readout (only the last token feeds it)
        let up_flat = upstream.reshaped(1, self.cfg.horizon * self.cfg.vars)?;
        let last_token = Matrix::from_vec(1, d, cache.block2.row(len - 1).to_vec())?;
        let (d_last, g_wr, g_br) = affine_backward(&last_token, w(W_READOUT), &up_flat)?;
        grad_sparse[W_READOUT] = g_wr;
        grad_dense[B_READOUT] = g_br;
        let mut d_block2 = Matrix::zeros(len, d);
        d_block2.row_mut(len - 1).copy_from_slice(d_last.row(0));

        // norm 2 scale/shift
        let (d_resid2, g_ln2s, g_ln2b) =
            scale_shift_backward(&cache.ln2, &d_block2, b(LN2_SCALE))?;
        grad_dense[LN2_SCALE] = g_ln2s;
        grad_dense[LN2_SHIFT] = g_ln2b;

        // feed-forward branch (+ residual into block1)
        let mut d_block1 = d_resid2.clone();
        let (d_hidden, g_w2, g_b2) = affine_backward(&cache.ffn_hidden, w(W_FFN_DOWN), &d_resid2)?;
        grad_sparse[W_FFN_DOWN] = g_w2;
        grad_dense[B_FFN_DOWN] = g_b2;
        let d_pre = relu_backward(&cache.ffn_pre, &d_hidden)?;
        let (d_block1_ffn, g_w1, g_b1) = affine_backward(&cache.block1, w(W_FFN_UP), &d_pre)?;
        grad_sparse[W_FFN_UP] = g_w1;
        grad_dense[B_FFN_UP] = g_b1;
        d_block1.add_assign(&d_block1_ffn)?;

        // norm 1 scale/shift
        let (d_resid1, g_ln1s, g_ln1b) =
            scale_shift_backward(&cache.ln1, &d_block1, b(LN1_SCALE))?;
        grad_dense[LN1_SCALE] = g_ln1s;
        grad_dense[LN1_SHIFT] = g_ln1b;

        // attention branch (+ residual into the embedding)
        let mut d_embedded = d_resid1.clone();
        let (d_mix, g_wo, g_bo) = affine_backward(&cache.attn_mix, w(W_ATTN_OUT), &d_resid1)?;
        grad_sparse[W_ATTN_OUT] = g_wo;
        grad_dense[B_ATTN_OUT] = g_bo;

        let d_attn = matmul(&d_mix, &cache.values.transpose())?;
        let d_values = matmul(&cache.attn_weights.transpose(), &d_mix)?;
        let d_scores = softmax_backward(&cache.attn_weights, &d_attn)?.scaled(self.scale());
        let d_queries = matmul(&d_scores, &cache.keys)?;
        let d_keys = matmul(&d_scores.transpose(), &cache.queries)?;

        let (d_emb_q, g_wq, g_bq) = affine_backward(&cache.embedded, w(W_QUERY), &d_queries)?;
        let (d_emb_k, g_wk, g_bk) = affine_backward(&cache.embedded, w(W_KEY), &d_keys)?;
        let (d_emb_v, g_wv, g_bv) = affine_backward(&cache.embedded, w(W_VALUE), &d_values)?;
        grad_sparse[W_QUERY] = g_wq;
        grad_sparse[W_KEY] = g_wk;
        grad_sparse[W_VALUE] = g_wv;
        grad_dense[B_QUERY] = g_bq;
        grad_dense[B_KEY] = g_bk;
        grad_dense[B_VALUE] = g_bv;
        d_embedded.add_assign(&d_emb_q)?;
        d_embedded.add_assign(&d_emb_k)?;
        d_embedded.add_assign(&d_emb_v)?;

        // input projection and positional embedding
        grad_dense[POSITIONAL] = d_embedded.clone();
        let (_, g_win, g_bin) = affine_backward(x, w(W_INPUT), &d_embedded)?;
        grad_sparse[W_INPUT] = g_win;
        grad_dense[B_INPUT] = g_bin;

        Ok((
            loss,
            GradSet {
                sparse: grad_sparse,
                dense: grad_dense,
            },
        ))
    }
}

fn scale_shift(x: &mut Matrix, scale: &Matrix, shift: &Matrix) {
    for r in 0..x.rows() {
        let row = x.row_mut(r);
        for (c, v) in row.iter_mut().enumerate() {
            *v = *v * scale.data()[c] + shift.data()[c];
        }
    }
}

/// Backward through `y = scale * norm(x) + shift`, returning (dL/dx and the
/// scale/shift gradients). `cache` is the layernorm cache of the same row
/// block.
fn scale_shift_backward(
    cache: &LayerNormCache,
    upstream: &Matrix,
    scale: &Matrix,
) -> Result<(Matrix, Matrix, Matrix)> {
    let normalized = &cache.normalized;
    let mut d_norm = upstream.clone();
    let mut g_scale = Matrix::zeros(1, normalized.cols());
    let mut g_shift = Matrix::zeros(1, normalized.cols());
    for r in 0..normalized.rows() {
        let up = upstream.row(r);
        let nr = normalized.row(r);
        let dn = d_norm.row_mut(r);
        for c in 0..nr.len() {
            g_scale.data_mut()[c] += up[c] * nr[c];
            g_shift.data_mut()[c] += up[c];
            dn[c] = up[c] * scale.data()[c];
        }
    }
    let dx = layernorm_backward(cache, &d_norm)?;
    Ok((dx, g_scale, g_shift))
}
