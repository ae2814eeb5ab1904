use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::Dims;

/// Objective, local-model and feedback-design weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// Information weight on `1 / lambda_min`.
    pub q_p: f64,
    /// Tracking weight on `x - x_d` (`n x n`, PSD).
    pub q_tau: DMatrix<f64>,
    /// Control effort weight (`m x m`, PD).
    pub r_tau: DMatrix<f64>,
    /// Local quadratic model on the extended state (PSD).
    pub q_n: DMatrix<f64>,
    pub r_n: DMatrix<f64>,
    /// Feedback design for the projection (PSD / PD).
    pub q_k: DMatrix<f64>,
    pub r_k: DMatrix<f64>,
}

fn check(name: &str, m: &DMatrix<f64>, size: usize, definite: bool) -> Result<()> {
    if m.shape() != (size, size) {
        return Err(Error::InvalidConfig(format!("{name} must be {size}x{size}, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) || (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidConfig(format!("{name} must be finite and symmetric")));
    }
    let lmin = SymmetricEigen::new(m.clone()).eigenvalues.min();
    let floor = 1e-12 * m.amax();
    if definite && lmin <= floor {
        return Err(Error::InvalidConfig(format!("{name} must be positive definite (min eigenvalue {lmin})")));
    }
    if !definite && lmin < -floor {
        return Err(Error::InvalidConfig(format!("{name} must be positive semi-definite (min eigenvalue {lmin})")));
    }
    Ok(())
}

impl Weights {
    /// Checks sizes and definiteness against the model dimensions.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        if !(self.q_p >= 0.0 && self.q_p.is_finite()) {
            return Err(Error::InvalidConfig(format!("q_p must be finite and >= 0, got {}", self.q_p)));
        }
        let ext = dims.extended();
        check("q_tau", &self.q_tau, dims.n, false)?;
        check("r_tau", &self.r_tau, dims.m, true)?;
        check("q_n", &self.q_n, ext, false)?;
        check("r_n", &self.r_n, dims.m, true)?;
        check("q_k", &self.q_k, ext, false)?;
        check("r_k", &self.r_k, dims.m, true)
    }

    /// `Q_p = 10`, `Q_tau = 0`, `R_tau = 0.1 I`, `Q_n = I`, `R_n = I`,
    /// `Q_K = blkdiag(I_n, 0)`, `R_K = I`.
    pub fn defaults(dims: Dims) -> Self {
        let ext = dims.extended();
        let mut q_k = DMatrix::zeros(ext, ext);
        q_k.view_mut((0, 0), (dims.n, dims.n)).fill_with_identity();
        Self {
            q_p: 10.0,
            q_tau: DMatrix::zeros(dims.n, dims.n),
            r_tau: DMatrix::identity(dims.m, dims.m) * 0.1,
            q_n: DMatrix::identity(ext, ext),
            r_n: DMatrix::identity(dims.m, dims.m),
            q_k,
            r_k: DMatrix::identity(dims.m, dims.m),
        }
    }
}
