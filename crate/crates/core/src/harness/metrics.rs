//! Forecast quality metrics.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn check(pred: &Matrix, target: &Matrix) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::dimension(
            "metric",
            format!("prediction {:?} vs target {:?}", pred.shape(), target.shape()),
        ));
    }
    Ok(())
}

/// Mean squared error over all H*m entries.
pub fn mse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    check(pred, target)?;
    let n = pred.len() as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data().iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// Mean absolute error over all H*m entries.
pub fn mae(pred: &Matrix, target: &Matrix) -> Result<f64> {
    check(pred, target)?;
    let n = pred.len() as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data().iter())
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let pred = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let target = Matrix::from_vec(2, 1, vec![1.0, 4.0]).unwrap();
        assert_eq!(mse(&pred, &target).unwrap(), 2.0);
        assert_eq!(mae(&pred, &target).unwrap(), 1.0);
    }

    #[test]
    fn identical_inputs_score_zero() {
        let m = Matrix::from_fn(3, 4, |r, c| (r * c) as f64);
        assert_eq!(mse(&m, &m).unwrap(), 0.0);
        assert_eq!(mae(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn error_scaling_homogeneity() {
        let target = Matrix::zeros(2, 3);
        let pred = Matrix::from_fn(2, 3, |r, c| (r + c) as f64 + 1.0);
        let scaled = pred.scaled(3.0);
        assert!((mse(&scaled, &target).unwrap() - 9.0 * mse(&pred, &target).unwrap()).abs() < 1e-12);
        assert!((mae(&scaled, &target).unwrap() - 3.0 * mae(&pred, &target).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(3, 2);
        assert!(mse(&a, &b).is_err());
        assert!(mae(&a, &b).is_err());
    }
}
