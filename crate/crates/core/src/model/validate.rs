//! Finite-difference audit of every analytic derivative a model exposes.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PlantModel;
use crate::error::{Error, Result};
use crate::numkit::{fd_jacobian, fd_matrix_jacobian, scaled_error, Tensor3};

/// Derivatives are accepted when the scaled error is below this.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-4;

const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeError {
    pub name: &'static str,
    /// Worst `|analytic - fd|_max / max(|fd|_max, 1)` over all samples.
    pub max_error: f64,
    pub worst_sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub entries: Vec<DerivativeError>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.max_error < DERIVATIVE_TOLERANCE)
    }

    pub fn worst(&self) -> Option<&DerivativeError> {
        self.entries
            .iter()
            .max_by(|a, b| a.max_error.total_cmp(&b.max_error))
    }
}

type Vecs<'a> = (&'a DVector<f64>, &'a DVector<f64>, &'a DVector<f64>);

#[derive(Clone, Copy)]
enum Wrt {
    X,
    U,
    Theta,
}

fn perturb<'a>(pt: Vecs<'a>, wrt: Wrt, v: &'a DVector<f64>) -> Vecs<'a> {
    match wrt {
        Wrt::X => (v, pt.1, pt.2),
        Wrt::U => (pt.0, v, pt.2),
        Wrt::Theta => (pt.0, pt.1, v),
    }
}

fn base(pt: Vecs<'_>, wrt: Wrt) -> &DVector<f64> {
    match wrt {
        Wrt::X => pt.0,
        Wrt::U => pt.1,
        Wrt::Theta => pt.2,
    }
}

fn fd_vec(
    pt: Vecs<'_>,
    wrt: Wrt,
    f: impl Fn(Vecs<'_>) -> DVector<f64>,
) -> Result<DMatrix<f64>> {
    fd_jacobian(|v| f(perturb(pt, wrt, v)), base(pt, wrt), FD_STEP)
}

fn fd_mat(
    pt: Vecs<'_>,
    wrt: Wrt,
    f: impl Fn(Vecs<'_>) -> DMatrix<f64>,
) -> Result<Tensor3> {
    fd_matrix_jacobian(|v| f(perturb(pt, wrt, v)), base(pt, wrt), FD_STEP)
}

/// Per-derivative worst error against central differences of the next
/// lower-order member, at `samples` points drawn from the model's domain.
pub fn derivative_errors(model: &dyn PlantModel, samples: usize, seed: u64) -> Result<ValidationReport> {
    if samples == 0 {
        return Err(Error::InvalidConfig("derivative validation needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Vec<DerivativeError> = Vec::new();
    let mut record = |name: &'static str, err: f64, sample: usize| {
        match worst.iter_mut().find(|e| e.name == name) {
            Some(e) if err > e.max_error || err.is_nan() => {
                e.max_error = err;
                e.worst_sample = sample;
            }
            Some(_) => {}
            None => worst.push(DerivativeError {
                name,
                max_error: err,
                worst_sample: sample,
            }),
        }
    };

    for s in 0..samples {
        let (x, u, th) = model.sample_point(&mut rng);
        let pt: Vecs<'_> = (&x, &u, &th);
        let m = model;
        let f = |q: Vecs<'_>| m.dynamics(q.0, q.1, q.2);
        let g = |q: Vecs<'_>| m.output(q.0, q.1, q.2);
        let fx = |q: Vecs<'_>| m.df_dx(q.0, q.1, q.2);
        let fth = |q: Vecs<'_>| m.df_dtheta(q.0, q.1, q.2);
        let gx = |q: Vecs<'_>| m.dg_dx(q.0, q.1, q.2);
        let gth = |q: Vecs<'_>| m.dg_dtheta(q.0, q.1, q.2);

        let mat = |a: &DMatrix<f64>, b: &DMatrix<f64>| scaled_error(a.as_slice(), b.as_slice());
        let ten = |a: &Tensor3, b: &Tensor3| scaled_error(a.as_slice(), b.as_slice());

        record("D_x f", mat(&fx(pt), &fd_vec(pt, Wrt::X, f)?), s);
        record("D_theta f", mat(&fth(pt), &fd_vec(pt, Wrt::Theta, f)?), s);
        record("D_u f", mat(&m.df_du(&x, &u, &th), &fd_vec(pt, Wrt::U, f)?), s);
        record("D2_x f", ten(&m.d2f_dx2(&x, &u, &th), &fd_mat(pt, Wrt::X, fx)?), s);
        record(
            "D_theta D_x f",
            ten(&m.d2f_dx_dtheta(&x, &u, &th), &fd_mat(pt, Wrt::Theta, fx)?),
            s,
        );
        record(
            "D_x D_theta f",
            ten(&m.d2f_dx_dtheta(&x, &u, &th).transpose_last(), &fd_mat(pt, Wrt::X, fth)?),
            s,
        );
        record("D2_theta f", ten(&m.d2f_dtheta2(&x, &u, &th), &fd_mat(pt, Wrt::Theta, fth)?), s);
        record("D_u D_x f", ten(&m.d2f_dx_du(&x, &u, &th), &fd_mat(pt, Wrt::U, fx)?), s);
        record("D_u D_theta f", ten(&m.d2f_dtheta_du(&x, &u, &th), &fd_mat(pt, Wrt::U, fth)?), s);
        record("D_x g", mat(&gx(pt), &fd_vec(pt, Wrt::X, g)?), s);
        record("D_theta g", mat(&gth(pt), &fd_vec(pt, Wrt::Theta, g)?), s);
        record("D2_x g", ten(&m.d2g_dx2(&x, &u, &th), &fd_mat(pt, Wrt::X, gx)?), s);
        record("D_x D_theta g", ten(&m.d2g_dx_dtheta(&x, &u, &th), &fd_mat(pt, Wrt::Theta, gx)?), s);
        record("D2_theta g", ten(&m.d2g_dtheta2(&x, &u, &th), &fd_mat(pt, Wrt::Theta, gth)?), s);
    }
    Ok(ValidationReport {
        samples,
        entries: worst,
    })
}

/// Fails with [`Error::ValidationFailed`] naming the worst derivative when
/// any derivative exceeds [`DERIVATIVE_TOLERANCE`].
pub fn validate_derivatives(model: &dyn PlantModel, samples: usize, seed: u64) -> Result<ValidationReport> {
    let report = derivative_errors(model, samples, seed)?;
    if let Some(bad) = report
        .entries
        .iter()
        .filter(|e| !(e.max_error < DERIVATIVE_TOLERANCE))
        .max_by(|a, b| a.max_error.total_cmp(&b.max_error))
    {
        return Err(Error::ValidationFailed {
            derivative: bad.name.to_string(),
            sample: bad.worst_sample,
            rel_error: bad.max_error,
        });
    }
    Ok(report)
}
