//! Central finite differences, used as oracles for analytic derivatives.

use nalgebra::{DMatrix, DVector};

use super::tensor::Tensor3;
use crate::error::{Error, Result};

/// Central-difference Jacobian of `f` at `x` with absolute step `h`.
pub fn fd_jacobian<F>(mut f: F, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {h}")));
    }
    let f0 = f(x);
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        let col = (fp - fm) / (2.0 * h);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResult(format!("finite difference column {j}")));
        }
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Central-difference derivative of a matrix-valued `f`; entry `[i, j, k]`
/// is `d f(x)[i, j] / d x[k]`.
pub fn fd_matrix_jacobian<F>(mut f: F, x: &DVector<f64>, h: f64) -> Result<Tensor3>
where
    F: FnMut(&DVector<f64>) -> DMatrix<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {h}")));
    }
    let f0 = f(x);
    let (r, c) = f0.shape();
    let mut out = Tensor3::zeros(r, c, x.len());
    let mut xp = x.clone();
    for k in 0..x.len() {
        xp[k] = x[k] + h;
        let fp = f(&xp);
        xp[k] = x[k] - h;
        let fm = f(&xp);
        xp[k] = x[k];
        for i in 0..r {
            for j in 0..c {
                let d = (fp[(i, j)] - fm[(i, j)]) / (2.0 * h);
                if !d.is_finite() {
                    return Err(Error::NonFiniteResult(format!("finite difference slice {k}")));
                }
                out.set(i, j, k, d);
            }
        }
    }
    Ok(out)
}
