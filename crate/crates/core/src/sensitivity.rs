//! First- and second-order parameter sensitivities of the state,
//! `psi = dx/dtheta` and `omega = d^2x/dtheta^2`, integrated jointly with
//! the state so one step controller governs everything.
//!
//! Flattened layouts (row-major): `psi[i, j]` lives at `i * p + j`,
//! `omega[i, j, k]` at `(i * p + j) * p + k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Dims, PlantModel};
use crate::numkit::{integrate_with_breakpoints, DenseTrajectory, IntegratorConfig, Tensor3};

/// State and sensitivity curves sharing one set of adaptive knots.
#[derive(Debug, Clone)]
pub struct SensitivityBundle {
    pub state: DenseTrajectory,
    pub psi: DenseTrajectory,
    pub omega: Option<DenseTrajectory>,
    dims: Dims,
}

impl SensitivityBundle {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn psi_at(&self, t: f64) -> DMatrix<f64> {
        psi_from_flat(self.psi.at(t).as_slice(), self.dims.n, self.dims.p)
    }

    pub fn omega_at(&self, t: f64) -> Option<Tensor3> {
        let (n, p) = (self.dims.n, self.dims.p);
        self.omega
            .as_ref()
            .map(|o| Tensor3::from_vec(n, p, p, o.at(t).as_slice().to_vec()))
    }
}

/// `n x p` matrix from its row-major flattening.
pub fn psi_from_flat(flat: &[f64], n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, p, &flat[..n * p])
}

/// Row-major flattening of `psi`.
pub fn flatten_psi(psi: &DMatrix<f64>) -> Vec<f64> {
    psi.transpose().as_slice().to_vec()
}

fn interior_knots(u: &DenseTrajectory) -> &[f64] {
    let t = u.times();
    if t.len() > 2 {
        &t[1..t.len() - 1]
    } else {
        &[]
    }
}

fn check_input(model: &dyn PlantModel, x0: &DVector<f64>, u: &DenseTrajectory, theta: &DVector<f64>) -> Result<()> {
    let d = model.dims();
    for (what, expected, got) in [
        ("initial state", d.n, x0.len()),
        ("input trajectory", d.m, u.dim()),
        ("parameters", d.p, theta.len()),
    ] {
        if expected != got {
            return Err(Error::DimensionMismatch { what, expected, got });
        }
    }
    Ok(())
}

/// Open-loop simulation of the state over the span of `u`.
pub fn simulate(
    model: &dyn PlantModel,
    x0: &DVector<f64>,
    u: &DenseTrajectory,
    theta: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory> {
    check_input(model, x0, u, theta)?;
    let mut uv = DVector::zeros(u.dim());
    integrate_with_breakpoints(
        |t, x| {
            u.at_into(t, &mut uv);
            model.dynamics(x, &uv, theta)
        },
        x0,
        (u.t0(), u.tf()),
        interior_knots(u),
        cfg,
    )
}

/// Right-hand side of the state plus first-sensitivity system at `(x, psi)`
/// stacked as `xbar = (x, vec psi)`.
pub fn extended_field(model: &dyn PlantModel, xbar: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
    let d = model.dims();
    let x = xbar.rows(0, d.n).into_owned();
    let psi = psi_from_flat(&xbar.as_slice()[d.n..], d.n, d.p);
    let mut out = DVector::zeros(d.extended());
    out.rows_mut(0, d.n).copy_from(&model.dynamics(&x, u, theta));
    let psi_dot = model.df_dx(&x, u, theta) * psi + model.df_dtheta(&x, u, theta);
    out.as_mut_slice()[d.n..].copy_from_slice(&flatten_psi(&psi_dot));
    out
}

/// Right-hand side of `omega`, given the state and `psi`.
fn omega_rate(
    model: &dyn PlantModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
    psi: &DMatrix<f64>,
    omega: &Tensor3,
) -> Tensor3 {
    let fxx_pp = model.d2f_dx2(x, u, theta).mul_last(psi).mul_middle(psi);
    let fxt_p = model.d2f_dx_dtheta(x, u, theta).mul_middle(psi);
    omega
        .left_mul(&model.df_dx(x, u, theta))
        .add(&fxx_pp)
        .add(&fxt_p)
        .add(&fxt_p.transpose_last())
        .add(&model.d2f_dtheta2(x, u, theta))
}

/// Integrates the state with `psi` (and `omega` when `second_order`) as one
/// augmented system from `x0` under the input `u`.
pub fn propagate(
    model: &dyn PlantModel,
    x0: &DVector<f64>,
    u: &DenseTrajectory,
    theta: &DVector<f64>,
    second_order: bool,
    cfg: &IntegratorConfig,
) -> Result<SensitivityBundle> {
    check_input(model, x0, u, theta)?;
    let d = model.dims();
    let (n, p) = (d.n, d.p);
    let ext = d.extended();
    let total = ext + if second_order { n * p * p } else { 0 };
    let mut z0 = DVector::zeros(total);
    z0.rows_mut(0, n).copy_from(x0);

    let mut uv = DVector::zeros(u.dim());
    let traj = integrate_with_breakpoints(
        |t, z| {
            u.at_into(t, &mut uv);
            let xbar = z.rows(0, ext).into_owned();
            let mut out = DVector::zeros(total);
            out.rows_mut(0, ext).copy_from(&extended_field(model, &xbar, &uv, theta));
            if second_order {
                let x = z.rows(0, n).into_owned();
                let psi = psi_from_flat(&z.as_slice()[n..], n, p);
                let omega = Tensor3::from_vec(n, p, p, z.as_slice()[ext..].to_vec());
                let rate = omega_rate(model, &x, &uv, theta, &psi, &omega);
                out.as_mut_slice()[ext..].copy_from_slice(rate.as_slice());
            }
            out
        },
        &z0,
        (u.t0(), u.tf()),
        interior_knots(u),
        cfg,
    )?;
    Ok(SensitivityBundle {
        state: traj.components(0, n),
        psi: traj.components(n, n * p),
        omega: second_order.then(|| traj.components(ext, n * p * p)),
        dims: d,
    })
}

/// `psi(t)` along the trajectory starting at `x_traj`'s initial state.
///
/// The state is re-integrated together with `psi`, so `x_traj` only
/// supplies the initial condition and span.
pub fn propagate_first(
    model: &dyn PlantModel,
    x_traj: &DenseTrajectory,
    u: &DenseTrajectory,
    theta: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory> {
    Ok(propagate(model, x_traj.first(), u, theta, false, cfg)?.psi)
}

/// `omega(t)` along the trajectory; `psi` must come from
/// [`propagate_first`] on the same trajectory and is checked for shape and
/// its zero initial value. The state and `psi` are re-integrated jointly.
pub fn propagate_second(
    model: &dyn PlantModel,
    x_traj: &DenseTrajectory,
    u: &DenseTrajectory,
    theta: &DVector<f64>,
    psi: &DenseTrajectory,
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory> {
    let d = model.dims();
    if psi.dim() != d.n * d.p {
        return Err(Error::DimensionMismatch {
            what: "psi trajectory",
            expected: d.n * d.p,
            got: psi.dim(),
        });
    }
    if psi.first().amax() != 0.0 {
        return Err(Error::InvalidConfig("psi must start at zero".into()));
    }
    let bundle = propagate(model, x_traj.first(), u, theta, true, cfg)?;
    Ok(bundle.omega.expect("second order requested"))
}

/// `Gamma = D_x g psi + D_theta g`, the output sensitivity (`h x p`).
pub fn output_sensitivity(
    model: &dyn PlantModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
    psi: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = model.dims();
    if psi.shape() != (d.n, d.p) {
        return Err(Error::DimensionMismatch {
            what: "psi rows x cols",
            expected: d.n * d.p,
            got: psi.nrows() * psi.ncols(),
        });
    }
    Ok(model.dg_dx(x, u, theta) * psi + model.dg_dtheta(x, u, theta))
}
