//! Differentiable layer primitives with hand-written backward passes.
//!
//! Conventions: inputs are row-major matrices whose rows are independent
//! samples (or sequence positions); `upstream` is dLoss/dOutput with the
//! output's shape. Every backward here is checked against central finite
//! differences in the tests.

use crate::error::{Error, Result};
use crate::numerics::matrix::{matmul, Matrix};

pub const LAYERNORM_EPS: f64 = 1e-5;

/// y = x W + b, with x: n x d_in, W: d_in x d_out, b: 1 x d_out.
pub fn affine_forward(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    let mut y = matmul(x, w)?;
    y.add_row_broadcast(b)?;
    Ok(y)
}

/// Gradients of the affine map: (dL/dx, dL/dW, dL/db).
pub fn affine_backward(
    x: &Matrix,
    w: &Matrix,
    upstream: &Matrix,
) -> Result<(Matrix, Matrix, Matrix)> {
    if upstream.rows() != x.rows() || upstream.cols() != w.cols() {
        return Err(Error::dimension(
            "affine_backward",
            format!(
                "upstream {}x{} for x {}x{} and w {}x{}",
                upstream.rows(),
                upstream.cols(),
                x.rows(),
                x.cols(),
                w.rows(),
                w.cols()
            ),
        ));
    }
    let grad_x = matmul(upstream, &w.transpose())?;
    let grad_w = matmul(&x.transpose(), upstream)?;
    let grad_b = upstream.col_sums();
    Ok((grad_x, grad_w, grad_b))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_forward(x: &Matrix) -> Matrix {
    let mut y = x.clone();
    for r in 0..y.rows() {
        let row = y.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    y
}

/// Backward through a row-wise softmax given its output `y`.
pub fn softmax_backward(y: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    if y.shape() != upstream.shape() {
        return Err(Error::dimension("softmax_backward", "shape mismatch"));
    }
    let mut dx = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let yr = y.row(r);
        let ur = upstream.row(r);
        let dot: f64 = yr.iter().zip(ur.iter()).map(|(a, b)| a * b).sum();
        let dr = dx.row_mut(r);
        for c in 0..yr.len() {
            dr[c] = yr[c] * (ur[c] - dot);
        }
    }
    Ok(dx)
}

pub fn relu_forward(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// dL/dx for relu; the derivative at exactly 0 is taken as 0.
pub fn relu_backward(x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    if x.shape() != upstream.shape() {
        return Err(Error::dimension("relu_backward", "shape mismatch"));
    }
    let mut dx = upstream.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data().iter()) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
    Ok(dx)
}

/// Per-row cache for the layernorm backward.
pub struct LayerNormCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
}

/// Row-wise normalization to mean 0 / variance 1 (before any scale/shift).
pub fn layernorm_forward(x: &Matrix) -> (Matrix, LayerNormCache) {
    let n = x.cols() as f64;
    let mut y = Matrix::zeros(x.rows(), x.cols());
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let is = 1.0 / (var + LAYERNORM_EPS).sqrt();
        inv_std.push(is);
        let out = y.row_mut(r);
        for c in 0..row.len() {
            out[c] = (row[c] - mean) * is;
        }
    }
    let normalized = y.clone();
    (y, LayerNormCache { normalized, inv_std })
}

/// Backward through the parameter-free row normalization.
pub fn layernorm_backward(cache: &LayerNormCache, upstream: &Matrix) -> Result<Matrix> {
    let xhat = &cache.normalized;
    if xhat.shape() != upstream.shape() {
        return Err(Error::dimension("layernorm_backward", "shape mismatch"));
    }
    let n = xhat.cols() as f64;
    let mut dx = Matrix::zeros(xhat.rows(), xhat.cols());
    for r in 0..xhat.rows() {
        let xh = xhat.row(r);
        let up = upstream.row(r);
        let sum_up: f64 = up.iter().sum();
        let sum_up_xhat: f64 = up.iter().zip(xh.iter()).map(|(a, b)| a * b).sum();
        let is = cache.inv_std[r];
        let out = dx.row_mut(r);
        for c in 0..xh.len() {
            out[c] = is / n * (n * up[c] - sum_up - xh[c] * sum_up_xhat);
        }
    }
    Ok(dx)
}
