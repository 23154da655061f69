//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

/// Optimizer state for one parameter matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Matrix,
    pub second_moment: Matrix,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state for a rows x cols parameter. beta1/beta2/epsilon use the
    /// standard 0.9 / 0.999 / 1e-8 defaults.
    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        AdamState {
            first_moment: Matrix::zeros(rows, cols),
            second_moment: Matrix::zeros(rows, cols),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Zero the moments at one flat position (used when a pruned weight is
    /// regrown, so it does not inherit stale momentum).
    pub fn reset_position(&mut self, flat: usize) {
        self.first_moment.data_mut()[flat] = 0.0;
        self.second_moment.data_mut()[flat] = 0.0;
    }
}

/// One bias-corrected Adam update, in place. Masked-out parameters are the
/// caller's concern: re-zero them after the step.
pub fn adam_step(
    param: &mut Matrix,
    grad: &Matrix,
    state: &mut AdamState,
    label: &str,
) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::dimension(
            "adam_step",
            format!(
                "param {:?} vs grad {:?} ({label})",
                param.shape(),
                grad.shape()
            ),
        ));
    }
    if !grad.all_finite() {
        return Err(Error::NonFinite(format!("gradient of {label}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let m = state.first_moment.data_mut();
    let v = state.second_moment.data_mut();
    let p = param.data_mut();
    let g = grad.data();
    for i in 0..p.len() {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}
