use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numkit::{integrate_with_breakpoints, DenseTrajectory, IntegratorConfig};

use super::problem::{interior, ControlGrid, Linearization};

fn riccati_error(e: Error) -> Error {
    match e {
        Error::NonFiniteState { t } | Error::StepUnderflow { t, .. } | Error::MaxStepsExceeded { t, .. } => {
            Error::RiccatiBlowup { t }
        }
        other => other,
    }
}

/// Backward sweep of the Riccati equation with `P(tf) = 0`,
///
/// `-P' = A^T P + P A - P B R^-1 B^T P + Q`,
///
/// and, when `affine = Some((a, b))`, of the co-state offset with
/// `r(tf) = 0`,
///
/// `-r' = (A - B R^-1 B^T P)^T r + a - P B R^-1 b`.
///
/// Returns `(P, r)` flattened row-major as one curve.
pub fn riccati_sweep(
    lin: &Linearization,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    affine: Option<(&DenseTrajectory, &DenseTrajectory)>,
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory> {
    let nx = lin.nx;
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig("control weight must be positive definite".into()))?
        .inverse();
    let mut knots = lin.a.times().to_vec();
    if let Some((a, _)) = affine {
        knots = crate::numkit::merge_times(&knots, a.times(), 1e-12);
    }
    let z0 = DVector::zeros(nx * nx + nx);
    integrate_with_breakpoints(
        |t, z| {
            let p = DMatrix::from_row_slice(nx, nx, &z.as_slice()[..nx * nx]);
            let (am, bm) = (lin.a_at(t), lin.b_at(t));
            let pb = &p * &bm;
            let gain_t = &pb * &r_inv; // P B R^-1
            let mut pdot = -(am.transpose() * &p + &p * &am - &gain_t * pb.transpose() + q);
            pdot = (&pdot + pdot.transpose()) * 0.5;
            let mut out = DVector::zeros(nx * nx + nx);
            out.as_mut_slice()[..nx * nx].copy_from_slice(pdot.transpose().as_slice());
            if let Some((a, b)) = affine {
                let rv = z.rows(nx * nx, nx);
                let closed = &am - &bm * &r_inv * pb.transpose();
                let rdot = -(closed.transpose() * rv + a.at(t) - gain_t * b.at(t));
                out.rows_mut(nx * nx, nx).copy_from(&rdot);
            }
            out
        },
        &z0,
        (lin.tf(), lin.t0()),
        &interior(&knots),
        cfg,
    )
    .map_err(riccati_error)
}

fn p_at(sweep: &DenseTrajectory, nx: usize, t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(nx, nx, &sweep.at(t).as_slice()[..nx * nx])
}

/// Time-varying LQR gain `K = R_K^-1 B^T P` on the control grid,
/// flattened row-major (`m x nx`).
pub fn feedback_gain(
    lin: &Linearization,
    q_k: &DMatrix<f64>,
    r_k: &DMatrix<f64>,
    grid: &ControlGrid,
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory> {
    let sweep = riccati_sweep(lin, q_k, r_k, None, cfg)?;
    let r_inv = r_k.clone().cholesky().expect("checked by the sweep").inverse();
    grid.sample(|t| {
        let k = &r_inv * lin.b_at(t).transpose() * p_at(&sweep, lin.nx, t);
        DVector::from_row_slice(k.transpose().as_slice())
    })
}

/// Unpacks a gain sample into an `m x nx` matrix.
pub fn gain_matrix(k: &DenseTrajectory, m: usize, nx: usize, t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(m, nx, k.at(t).as_slice())
}

/// Perturbation `zeta = (zbar, v)` of the current trajectory.
#[derive(Debug, Clone)]
pub struct DescentDirection {
    pub z: DenseTrajectory,
    /// Piecewise linear on the control grid.
    pub v: DenseTrajectory,
    /// `integral a^T zbar + b^T v dt`, the directional derivative of `J`.
    pub dj_zeta: f64,
}

/// Response `zbar' = A zbar + B v`, `zbar(t0) = 0`, to a given `v`, along
/// with `integral a^T zbar + b^T v dt` as a quadrature state.
pub fn tangent_response(
    lin: &Linearization,
    a: &DenseTrajectory,
    b: &DenseTrajectory,
    v: DenseTrajectory,
    cfg: &IntegratorConfig,
) -> Result<DescentDirection> {
    let nx = lin.nx;
    let knots = crate::numkit::merge_times(&crate::numkit::merge_times(lin.a.times(), v.times(), 1e-12), a.times(), 1e-12);
    let traj = integrate_with_breakpoints(
        |t, s| {
            let z = s.rows(0, nx).into_owned();
            let vt = v.at(t);
            let mut out = DVector::zeros(nx + 1);
            out.rows_mut(0, nx).copy_from(&(lin.a_at(t) * &z + lin.b_at(t) * &vt));
            out[nx] = a.at(t).dot(&z) + b.at(t).dot(&vt);
            out
        },
        &DVector::zeros(nx + 1),
        (lin.t0(), lin.tf()),
        &interior(&knots),
        cfg,
    )?;
    Ok(DescentDirection {
        dj_zeta: traj.last()[nx],
        z: traj.components(0, nx),
        v,
    })
}

/// Minimizer of `integral a^T z + b^T v + 1/2 z^T Q_n z + 1/2 v^T R_n v dt`
/// subject to `z' = A z + B v`, `z(t0) = 0`.
///
/// The optimal feedback form `v = -R^-1 (B^T (P z + r) + b)` is integrated
/// forward, sampled on the control grid, and the state response to that
/// sampled `v` is recomputed so `(zbar, v)` is exactly tangent.
#[allow(clippy::too_many_arguments)]
pub fn descent_direction(
    a: &DenseTrajectory,
    b: &DenseTrajectory,
    lin: &Linearization,
    q_n: &DMatrix<f64>,
    r_n: &DMatrix<f64>,
    grid: &ControlGrid,
    cfg: &IntegratorConfig,
) -> Result<DescentDirection> {
    let nx = lin.nx;
    let sweep = riccati_sweep(lin, q_n, r_n, Some((a, b)), cfg)?;
    let r_inv = r_n.clone().cholesky().expect("checked by the sweep").inverse();
    let control = |t: f64, z: &DVector<f64>| {
        let s = sweep.at(t);
        let p = DMatrix::from_row_slice(nx, nx, &s.as_slice()[..nx * nx]);
        let r = s.rows(nx * nx, nx).into_owned();
        -(&r_inv * (lin.b_at(t).transpose() * (p * z + r) + b.at(t)))
    };
    let knots = crate::numkit::merge_times(sweep.times(), grid.times(), 1e-12);
    let z_opt = integrate_with_breakpoints(
        |t, z| lin.a_at(t) * z + lin.b_at(t) * control(t, z),
        &DVector::zeros(nx),
        (lin.t0(), lin.tf()),
        &interior(&knots),
        cfg,
    )?;
    let v = grid.sample(|t| control(t, &z_opt.at(t)))?;
    tangent_response(lin, a, b, v, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_lin(a: f64, b: f64, tf: f64) -> Linearization {
        let times = vec![0.0, tf];
        Linearization::from_samples(
            times,
            vec![DMatrix::from_element(1, 1, a); 2],
            vec![DMatrix::from_element(1, 1, b); 2],
        )
        .unwrap()
    }

    fn constant(v: f64, tf: f64) -> DenseTrajectory {
        DenseTrajectory::constant(0.0, tf, DVector::from_element(1, v)).unwrap()
    }

    #[test]
    fn scalar_are_limit() {
        let lin = constant_lin(0.0, 1.0, 20.0);
        let grid = ControlGrid::new(0.0, 20.0, 0.5).unwrap();
        let one = DMatrix::identity(1, 1);
        let k = feedback_gain(&lin, &one, &one, &grid, &IntegratorConfig::default()).unwrap();
        assert!((k.at(0.0)[0] - 1.0).abs() < 1e-8);
        assert_eq!(k.at(20.0)[0], 0.0);
    }

    #[test]
    fn zero_input_gain_vanishes() {
        let lin = constant_lin(-1.0, 0.0, 2.0);
        let grid = ControlGrid::new(0.0, 2.0, 0.1).unwrap();
        let one = DMatrix::identity(1, 1);
        let k = feedback_gain(&lin, &one, &one, &grid, &IntegratorConfig::default()).unwrap();
        assert!(k.values().iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn unforced_problem_has_zero_direction() {
        let lin = constant_lin(0.3, 1.0, 1.0);
        let grid = ControlGrid::new(0.0, 1.0, 0.01).unwrap();
        let one = DMatrix::identity(1, 1);
        let d = descent_direction(&constant(0.0, 1.0), &constant(0.0, 1.0), &lin, &one, &one, &grid, &IntegratorConfig::default())
            .unwrap();
        assert_eq!(d.dj_zeta, 0.0);
        assert!(d.v.values().iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn pointwise_minimizer() {
        // z' = v, a = 0, b = -1, Q = 0, R = 1: v = 1, z = t
        let lin = constant_lin(0.0, 1.0, 1.0);
        let grid = ControlGrid::new(0.0, 1.0, 0.01).unwrap();
        let d = descent_direction(
            &constant(0.0, 1.0),
            &constant(-1.0, 1.0),
            &lin,
            &DMatrix::zeros(1, 1),
            &DMatrix::identity(1, 1),
            &grid,
            &IntegratorConfig::default(),
        )
        .unwrap();
        for &t in grid.times() {
            assert!((d.v.at(t)[0] - 1.0).abs() < 1e-12);
            assert!((d.z.at(t)[0] - t).abs() < 1e-10);
        }
        assert!((d.dj_zeta + 1.0).abs() < 1e-10);
    }
}
