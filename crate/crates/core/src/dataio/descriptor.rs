use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spd::{sym, SpdMatrix};

/// Region covariance of the feature rows (`T` observations of `m` features),
/// `(1/(T−1))·Σ(fₜ−μ)(fₜ−μ)ᵀ + ridge·I`.
pub fn covariance_descriptor(features: &DMatrix<f64>, ridge: f64) -> Result<SpdMatrix> {
    let t = features.nrows();
    let m = features.ncols();
    if t < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 feature rows, got {t}")));
    }
    if m == 0 {
        return Err(Error::InvalidInput("feature rows are empty".into()));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidInput(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    if !features.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("features contain non-finite values".into()));
    }
    let mean = features.row_mean();
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let mut cov = sym(&(centered.transpose() * &centered)) / (t as f64 - 1.0);
    for i in 0..m {
        cov[(i, i)] += ridge;
    }
    SpdMatrix::new(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn constant_features_give_ridge() {
        let f = DMatrix::from_element(10, 3, 2.5);
        let c = covariance_descriptor(&f, 1e-3).unwrap();
        assert!((c.as_matrix() - DMatrix::identity(3, 3) * 1e-3).norm() < 1e-15);
        assert!(matches!(
            covariance_descriptor(&f, 0.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn cross_pattern() {
        let f = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let c = covariance_descriptor(&f, 0.1).unwrap();
        let expected = DMatrix::from_diagonal_element(2, 2, 2.0 / 3.0 + 0.1);
        assert!((c.as_matrix() - expected).norm() < 1e-14);
    }

    #[test]
    fn orthonormal_columns_give_identity() {
        // centered columns with Gram matrix (T−1)·I
        let t = 5.0f64;
        let s = ((t - 1.0) / 2.0).sqrt();
        let f = DMatrix::from_row_slice(5, 2, &[s, 0.0, -s, 0.0, 0.0, s, 0.0, -s, 0.0, 0.0]);
        let c = covariance_descriptor(&f, 0.0).unwrap();
        assert!((c.as_matrix() - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn rejects_too_few_rows() {
        let f = DMatrix::from_element(1, 3, 1.0);
        assert!(matches!(covariance_descriptor(&f, 1.0), Err(Error::InvalidInput(_))));
    }
}
