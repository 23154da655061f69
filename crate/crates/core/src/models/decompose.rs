//! Seasonal-trend decomposition by centered moving average.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Split a series into (trend, seasonal). The trend is a centered moving
/// average with edge-replication padding, the seasonal part is the residual
/// `x - trend`. Kernel must be odd so the window centers cleanly.
pub fn series_decompose(x: &Matrix, kernel: usize) -> Result<(Matrix, Matrix)> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "moving-average kernel must be odd and >= 1 (got {kernel})"
        )));
    }
    let half = kernel / 2;
    let rows = x.rows();
    let cols = x.cols();
    let mut trend = Matrix::zeros(rows, cols);
    for c in 0..cols {
        for t in 0..rows {
            let mut acc = 0.0;
            for o in 0..kernel {
                // offset in [-half, half], clamped to the series edges
                let idx = (t + o).saturating_sub(half).min(rows - 1);
                acc += x.at(idx, c);
            }
            *trend.at_mut(t, c) = acc / kernel as f64;
        }
    }
    let seasonal = x.sub(&trend)?;
    Ok((trend, seasonal))
}
