//! Normal distribution machinery: scalar CDFs, the bivariate CDF, and
//! rectangle probabilities for mean-zero Gaussian vectors.

mod bivariate;
mod mvn;
mod univariate;

use nalgebra::DMatrix;
use thiserror::Error;

pub use bivariate::{bivariate_normal_cdf, bivariate_normal_upper};
pub use mvn::{mvn_cdf, normal_interval, MvnEstimate, MvnOptions};
pub use univariate::{std_normal_cdf, std_normal_inv_cdf, std_normal_pdf, std_normal_sf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaussianError {
    #[error("covariance must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("covariance is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("covariance contains a non-finite entry")]
    NonFinite,
    #[error("bounds have lengths {lower}/{upper}, expected {expected}")]
    DimensionMismatch {
        expected: usize,
        lower: usize,
        upper: usize,
    },
    #[error("bound {index} is empty or NaN (need lower < upper)")]
    InvalidBounds { index: usize },
    #[error("estimate {} has error {:e} above the requested tolerance", .estimate.prob, .estimate.err)]
    NotConverged { estimate: MvnEstimate },
}

/// A mean-zero multivariate normal, identified by its covariance.
///
/// Singular covariances are allowed; zero-variance coordinates are treated as
/// deterministic zeros by [`mvn_cdf`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVector {
    cov: DMatrix<f64>,
}

impl GaussianVector {
    /// Validates symmetry (`|Σij − Σji| ≤ 1e-12·max(1, |Σij|)`) and
    /// semidefiniteness (`λmin ≥ −1e-9·trace`), then symmetrizes.
    pub fn new(cov: DMatrix<f64>) -> Result<Self, GaussianError> {
        let (rows, cols) = cov.shape();
        if rows != cols {
            return Err(GaussianError::NotSquare { rows, cols });
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(GaussianError::NonFinite);
        }
        for i in 0..rows {
            for j in (i + 1)..rows {
                let (a, b) = (cov[(i, j)], cov[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(GaussianError::NotSymmetric { row: i, col: j });
                }
            }
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        if rows > 0 {
            let min_eigenvalue = cov.clone().symmetric_eigenvalues().min();
            if min_eigenvalue < -1e-9 * cov.trace().max(0.0) {
                return Err(GaussianError::NotPositiveSemidefinite { min_eigenvalue });
            }
        }
        Ok(Self { cov })
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert!(matches!(
            GaussianVector::new(asym),
            Err(GaussianError::NotSymmetric { .. })
        ));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianVector::new(indef),
            Err(GaussianError::NotPositiveSemidefinite { .. })
        ));
        assert!(GaussianVector::new(DMatrix::zeros(3, 3)).is_ok());
    }
}
