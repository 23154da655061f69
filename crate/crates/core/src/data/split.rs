//! Chronological train/val/test splitting and train-statistics
//! standardization.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Split ratios. The default is 7:2:2 (train:val:test); `ett_mode` switches
/// to the 6:2:2 convention used for the ETT datasets.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub test_ratio: f64,
    pub ett_mode: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_ratio: 0.7,
            test_ratio: 0.2,
            ett_mode: false,
        }
    }
}

impl SplitSpec {
    pub fn ett() -> Self {
        SplitSpec {
            train_ratio: 0.6,
            test_ratio: 0.2,
            ett_mode: true,
        }
    }

    fn effective_train_ratio(&self) -> f64 {
        if self.ett_mode {
            0.6
        } else {
            self.train_ratio
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.effective_train_ratio();
        if !(tr > 0.0 && self.test_ratio > 0.0 && tr + self.test_ratio < 1.0) {
            return Err(Error::Config(format!(
                "invalid split ratios train={} test={}",
                tr, self.test_ratio
            )));
        }
        Ok(())
    }
}

/// Contiguous index ranges, in order train -> val -> test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// n_train = floor(r_train * T), n_test = floor(r_test * T), val takes the
/// remainder in the middle.
pub fn chronological_split(t_len: usize, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let n_train = (spec.effective_train_ratio() * t_len as f64).floor() as usize;
    let n_test = (spec.test_ratio * t_len as f64).floor() as usize;
    if n_train == 0 || n_test == 0 || n_train + n_test >= t_len {
        return Err(Error::Data(format!(
            "series of length {t_len} leaves no validation segment"
        )));
    }
    let n_val = t_len - n_train - n_test;
    Ok(Splits {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..t_len,
    })
}

/// Per-variable mean/std fitted on the train segment only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Fit on `train_range` rows. A zero-variance variable gets std 1 so the
    /// scaled column is all zeros instead of NaN.
    pub fn fit(values: &Matrix, train_range: &Range<usize>) -> Result<Scaler> {
        if train_range.is_empty() {
            return Err(Error::Data("empty train range for scaler".into()));
        }
        let n = train_range.len() as f64;
        let m = values.cols();
        let mut means = vec![0.0; m];
        for r in train_range.clone() {
            for (c, mean) in means.iter_mut().enumerate() {
                *mean += values.at(r, c);
            }
        }
        for mean in &mut means {
            *mean /= n;
        }
        let mut stds = vec![0.0; m];
        for r in train_range.clone() {
            for c in 0..m {
                let d = values.at(r, c) - means[c];
                stds[c] += d * d;
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Ok(Scaler { means, stds })
    }

    pub fn scale(&self, values: &Matrix) -> Matrix {
        Matrix::from_fn(values.rows(), values.cols(), |r, c| {
            (values.at(r, c) - self.means[c]) / self.stds[c]
        })
    }

    pub fn unscale(&self, values: &Matrix) -> Matrix {
        Matrix::from_fn(values.rows(), values.cols(), |r, c| {
            values.at(r, c) * self.stds[c] + self.means[c]
        })
    }
}

/// Z-score the whole series using train-segment statistics.
pub fn standardize(values: &Matrix, train_range: &Range<usize>) -> Result<(Matrix, Scaler)> {
    let scaler = Scaler::fit(values, train_range)?;
    Ok((scaler.scale(values), scaler))
}
