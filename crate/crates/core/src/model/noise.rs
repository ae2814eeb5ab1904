use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Gaussian output-noise covariance.
///
/// Construction requires a symmetric positive semi-definite matrix; the
/// inverse (needed by the estimator and the information matrix) exists only
/// when it is positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementNoise {
    sigma: DMatrix<f64>,
    inverse: Option<DMatrix<f64>>,
    sqrt: DMatrix<f64>,
}

impl MeasurementNoise {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return Err(Error::InvalidConfig("covariance must be square and non-empty".into()));
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        if (&sigma - sigma.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidConfig("covariance must be symmetric".into()));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("covariance must be finite".into()));
        }
        let eig = SymmetricEigen::new(sigma.clone());
        let lam_max = eig.eigenvalues.max().max(0.0);
        if eig.eigenvalues.min() < -1e-12 * lam_max.max(1e-300) {
            return Err(Error::InvalidConfig("covariance must be positive semi-definite".into()));
        }
        let root = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
        let sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&root);
        let inverse = sigma.clone().cholesky().map(|c| c.inverse());
        Ok(Self { sigma, inverse, sqrt })
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(variances)))
    }

    /// Covariance measured for the two link-angle channels of the tracked
    /// cart double pendulum, in rad^2.
    pub fn cart_default() -> Self {
        Self::diagonal(&[1.12e-4, 4.79e-4]).expect("valid default covariance")
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn inverse(&self) -> Result<&DMatrix<f64>> {
        self.inverse.as_ref().ok_or(Error::SingularCovariance)
    }

    /// A factor `L` with `L L^T = Sigma`.
    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    /// `alpha * Sigma`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(&self.sigma * alpha)
    }
}
