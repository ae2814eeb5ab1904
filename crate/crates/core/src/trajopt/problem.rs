use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::information::{min_eigenpair, unpack_upper, upper_pairs, InfoKind, InfoMatrix};
use crate::model::{Dims, MeasurementNoise, PlantModel};
use crate::numkit::{integrate_with_breakpoints, merge_times, uniform_grid, DenseTrajectory, IntegratorConfig};
use crate::sensitivity::{extended_field, psi_from_flat};

use super::Weights;

const KNOT_EPS: f64 = 1e-12;

/// Uniform knots on which controls (and descent controls) live.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    times: Vec<f64>,
}

impl ControlGrid {
    pub fn new(t0: f64, tf: f64, dt: f64) -> Result<Self> {
        if !(tf > t0 && dt > 0.0 && dt <= tf - t0) {
            return Err(Error::InvalidConfig(format!("control grid [{t0}, {tf}] with step {dt}")));
        }
        Ok(Self { times: uniform_grid(t0, tf, dt) })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn tf(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    /// Piecewise-linear control through `f` sampled at the knots.
    pub fn sample<F: FnMut(f64) -> DVector<f64>>(&self, f: F) -> Result<DenseTrajectory> {
        DenseTrajectory::linear(self.times.clone(), self.times.iter().copied().map(f).collect())
    }

    /// `amplitude * sin(2 pi frequency (t - t0))` on each of `m` channels.
    pub fn sinusoid(&self, m: usize, amplitude: f64, frequency: f64) -> Result<DenseTrajectory> {
        let t0 = self.t0();
        self.sample(|t| DVector::from_element(m, amplitude * (std::f64::consts::TAU * frequency * (t - t0)).sin()))
    }
}

/// A curve `(xbar, u)` with `xbar = (x, vec psi)`.
#[derive(Debug, Clone)]
pub struct ExtendedTrajectory {
    pub xbar: DenseTrajectory,
    pub u: DenseTrajectory,
    /// Set when `xbar` was integrated from the dynamics under `u`.
    pub feasible: bool,
    dims: Dims,
}

impl ExtendedTrajectory {
    /// Open-loop integration of state and sensitivities from `x0`
    /// (`psi(t0) = 0`) under `u`.
    pub fn simulate(
        model: &dyn PlantModel,
        theta: &DVector<f64>,
        x0: &DVector<f64>,
        u: DenseTrajectory,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        let d = model.dims();
        if x0.len() != d.n || u.dim() != d.m || theta.len() != d.p {
            return Err(Error::DimensionMismatch {
                what: "state/input/parameter dims",
                expected: d.n + d.m + d.p,
                got: x0.len() + u.dim() + theta.len(),
            });
        }
        let mut xbar0 = DVector::zeros(d.extended());
        xbar0.rows_mut(0, d.n).copy_from(x0);
        let knots = interior(u.times());
        let mut uv = DVector::zeros(d.m);
        let xbar = integrate_with_breakpoints(
            |t, z| {
                u.at_into(t, &mut uv);
                extended_field(model, z, &uv, theta)
            },
            &xbar0,
            (u.t0(), u.tf()),
            &knots,
            cfg,
        )?;
        Ok(Self { xbar, u, feasible: true, dims: d })
    }

    /// Wraps curves that need not satisfy the dynamics.
    pub fn from_parts(dims: Dims, xbar: DenseTrajectory, u: DenseTrajectory) -> Result<Self> {
        if xbar.dim() != dims.extended() || u.dim() != dims.m {
            return Err(Error::DimensionMismatch {
                what: "extended trajectory",
                expected: dims.extended(),
                got: xbar.dim(),
            });
        }
        Ok(Self { xbar, u, feasible: false, dims })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn t0(&self) -> f64 {
        self.u.t0()
    }

    pub fn tf(&self) -> f64 {
        self.u.tf()
    }

    pub fn state(&self) -> DenseTrajectory {
        self.xbar.components(0, self.dims.n)
    }

    pub fn psi(&self) -> DenseTrajectory {
        self.xbar.components(self.dims.n, self.dims.n * self.dims.p)
    }

    pub fn x0(&self) -> DVector<f64> {
        self.xbar.first().rows(0, self.dims.n).into_owned()
    }

    /// Knots of both curves merged.
    pub fn knots(&self) -> Vec<f64> {
        merge_times(self.xbar.times(), self.u.times(), KNOT_EPS)
    }

    /// `(x, psi, u)` at `t`.
    pub fn split_at(&self, t: f64) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
        let xb = self.xbar.at(t);
        let (n, p) = (self.dims.n, self.dims.p);
        (xb.rows(0, n).into_owned(), psi_from_flat(&xb.as_slice()[n..], n, p), self.u.at(t))
    }
}

pub(crate) fn interior(times: &[f64]) -> Vec<f64> {
    if times.len() > 2 {
        times[1..times.len() - 1].to_vec()
    } else {
        Vec::new()
    }
}

/// Time-indexed linearization `zbar' = A zbar + B v` of the extended
/// dynamics, stored row-major and interpolated between sample knots.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub a: DenseTrajectory,
    pub b: DenseTrajectory,
    pub nx: usize,
    pub nu: usize,
}

impl Linearization {
    /// From sampled matrices; interpolation is cubic through the samples.
    pub fn from_samples(times: Vec<f64>, a: Vec<DMatrix<f64>>, b: Vec<DMatrix<f64>>) -> Result<Self> {
        let (nx, nu) = (a[0].nrows(), b[0].ncols());
        let flat = |m: &DMatrix<f64>| DVector::from_row_slice(m.transpose().as_slice());
        let a_tr = hermite_or_linear(times.clone(), a.iter().map(flat).collect())?;
        let b_tr = hermite_or_linear(times, b.iter().map(flat).collect())?;
        Ok(Self { a: a_tr, b: b_tr, nx, nu })
    }

    pub fn a_at(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.nx, self.nx, self.a.at(t).as_slice())
    }

    pub fn b_at(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.nx, self.nu, self.b.at(t).as_slice())
    }

    pub fn t0(&self) -> f64 {
        self.a.t0()
    }

    pub fn tf(&self) -> f64 {
        self.a.tf()
    }
}

pub(crate) fn hermite_or_linear(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<DenseTrajectory> {
    if times.len() >= 3 {
        DenseTrajectory::hermite_from_samples(times, values)
    } else {
        DenseTrajectory::linear(times, values)
    }
}

/// `A(t)`, `B(t)` of the extended dynamics at one point.
pub fn extended_jacobians(
    model: &dyn PlantModel,
    x: &DVector<f64>,
    psi: &DMatrix<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = model.dims();
    let (n, m, p) = (d.n, d.m, d.p);
    let ext = d.extended();
    let fx = model.df_dx(x, u, theta);
    let fxx = model.d2f_dx2(x, u, theta);
    let fxt = model.d2f_dx_dtheta(x, u, theta);
    let fxu = model.d2f_dx_du(x, u, theta);
    let ftu = model.d2f_dtheta_du(x, u, theta);
    let mut a = DMatrix::zeros(ext, ext);
    let mut b = DMatrix::zeros(ext, m);
    a.view_mut((0, 0), (n, n)).copy_from(&fx);
    b.view_mut((0, 0), (n, m)).copy_from(&model.df_du(x, u, theta));
    for i in 0..n {
        for j in 0..p {
            let row = n + i * p + j;
            for c in 0..n {
                // d psidot[i, j] / d x_c
                let mut s = fxt.get(i, c, j);
                for l in 0..n {
                    s += fxx.get(i, l, c) * psi[(l, j)];
                }
                a[(row, c)] = s;
                // d psidot[i, j] / d psi[c, j]
                a[(row, n + c * p + j)] = fx[(i, c)];
            }
            for q in 0..m {
                let mut s = ftu.get(i, j, q);
                for l in 0..n {
                    s += fxu.get(i, l, q) * psi[(l, j)];
                }
                b[(row, q)] = s;
            }
        }
    }
    (a, b)
}

/// Linearization of the extended dynamics sampled at the knots of `eta`.
pub fn dynamics_linearization(model: &dyn PlantModel, eta: &ExtendedTrajectory, theta: &DVector<f64>) -> Result<Linearization> {
    let times = eta.knots();
    let mut a_s = Vec::with_capacity(times.len());
    let mut b_s = Vec::with_capacity(times.len());
    for &t in &times {
        let (x, psi, u) = eta.split_at(t);
        let (a, b) = extended_jacobians(model, &x, &psi, &u, theta);
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResult(format!("dynamics linearization at t = {t}")));
        }
        a_s.push(a);
        b_s.push(b);
    }
    Linearization::from_samples(times, a_s, b_s)
}

/// Objective value with the pieces the linearization reuses.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub j: f64,
    pub info: InfoMatrix,
    /// `1/2 integral (x - x_d)^T Q_tau (x - x_d) + u^T R_tau u dt`.
    pub running: f64,
}

impl Evaluation {
    pub fn lambda_min(&self) -> f64 {
        self.info.lambda_min()
    }

    pub fn lambda_max(&self) -> f64 {
        self.info.lambda_max()
    }
}

/// The trajectory-design problem: model, parameters, noise and weights.
pub struct TrajectoryProblem<'a> {
    pub model: &'a dyn PlantModel,
    pub theta: DVector<f64>,
    pub sigma: MeasurementNoise,
    /// Tracking reference (state dimension).
    pub x_d: DenseTrajectory,
    pub weights: Weights,
    pub grid: ControlGrid,
    pub integrator: IntegratorConfig,
}

impl TrajectoryProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        let d = self.model.dims();
        self.weights.validate(d)?;
        self.integrator.validate()?;
        self.sigma.inverse()?;
        if self.theta.len() != d.p || self.sigma.dim() != d.h || self.x_d.dim() != d.n {
            return Err(Error::DimensionMismatch {
                what: "theta/sigma/reference dims",
                expected: d.p + d.h + d.n,
                got: self.theta.len() + self.sigma.dim() + self.x_d.dim(),
            });
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.model.dims()
    }

    /// Open-loop extended trajectory under `u` from `x0`.
    pub fn simulate(&self, x0: &DVector<f64>, u: DenseTrajectory) -> Result<ExtendedTrajectory> {
        ExtendedTrajectory::simulate(self.model, &self.theta, x0, u, &self.integrator)
    }

    /// Continuous information matrix and running cost by one adaptive
    /// quadrature along `eta`.
    fn quadrature(&self, eta: &ExtendedTrajectory) -> Result<(InfoMatrix, f64)> {
        let p = self.dims().p;
        let w = self.sigma.inverse()?.clone();
        let pairs = upper_pairs(p);
        let np = pairs.len();
        let wts = &self.weights;
        let knots = interior(&merge_times(&eta.knots(), self.x_d.times(), KNOT_EPS));
        let acc = integrate_with_breakpoints(
            |t, _| {
                let (x, psi, u) = eta.split_at(t);
                let gamma = self.model.dg_dx(&x, &u, &self.theta) * &psi + self.model.dg_dtheta(&x, &u, &self.theta);
                let m = gamma.transpose() * &w * &gamma;
                let e = &x - self.x_d.at(t);
                let run = 0.5 * (e.dot(&(&wts.q_tau * &e)) + u.dot(&(&wts.r_tau * &u)));
                let mut out = DVector::zeros(np + 1);
                for (k, &(a, b)) in pairs.iter().enumerate() {
                    out[k] = m[(a, b)];
                }
                out[np] = run;
                out
            },
            &DVector::zeros(np + 1),
            (eta.t0(), eta.tf()),
            &knots,
            &self.integrator,
        )?;
        let last = acc.last();
        let info = InfoMatrix::new(unpack_upper(&last.as_slice()[..np], p), InfoKind::Continuous)?;
        Ok((info, last[np]))
    }

    /// Continuous information matrix along `eta`, singular or not.
    pub fn information(&self, eta: &ExtendedTrajectory) -> Result<InfoMatrix> {
        Ok(self.quadrature(eta)?.0)
    }

    /// Objective with its information matrix. Fails on a singular matrix
    /// whenever the information term is active.
    pub fn evaluate(&self, eta: &ExtendedTrajectory) -> Result<Evaluation> {
        let (info, running) = self.quadrature(eta)?;
        let q_p = self.weights.q_p;
        let info_term = if q_p == 0.0 {
            0.0
        } else {
            info.require_nonsingular()?;
            q_p / info.lambda_min()
        };
        Ok(Evaluation { j: info_term + running, info, running })
    }

    /// `J = Q_p / lambda_min + 1/2 integral (tracking + effort) dt`.
    pub fn objective(&self, eta: &ExtendedTrajectory) -> Result<f64> {
        Ok(self.evaluate(eta)?.j)
    }

    /// `a(t)` over the extended state and `b(t)` over the input, sampled at
    /// the knots of `eta` (row-vector gradients stored as vectors).
    pub fn cost_linearization(&self, eta: &ExtendedTrajectory) -> Result<(DenseTrajectory, DenseTrajectory)> {
        let ev = self.evaluate(eta)?;
        self.cost_linearization_at(eta, &ev)
    }

    pub fn cost_linearization_at(&self, eta: &ExtendedTrajectory, ev: &Evaluation) -> Result<(DenseTrajectory, DenseTrajectory)> {
        let d = self.dims();
        let (n, p) = (d.n, d.p);
        let wts = &self.weights;
        let w = self.sigma.inverse()?;
        let eig = if wts.q_p == 0.0 {
            None
        } else {
            let (lam, _omega, nu) = min_eigenpair(&ev.info)?;
            Some((wts.q_p / (lam * lam), nu))
        };
        let times = eta.knots();
        let mut a_s = Vec::with_capacity(times.len());
        let mut b_s = Vec::with_capacity(times.len());
        for &t in &times {
            let (x, psi, u) = eta.split_at(t);
            let mut a = DVector::zeros(d.extended());
            let e = &x - self.x_d.at(t);
            a.rows_mut(0, n).copy_from(&(&wts.q_tau * e));
            if let Some((scale, nu)) = &eig {
                let gx = self.model.dg_dx(&x, &u, &self.theta);
                let gamma = &gx * &psi + self.model.dg_dtheta(&x, &u, &self.theta);
                // d lambda integrand = 2 q^T dGamma nu with q = W Gamma nu
                let q = w * (&gamma * nu);
                let v = &psi * nu;
                let gxx = self.model.d2g_dx2(&x, &u, &self.theta).contract_first(&q);
                let gxt = self.model.d2g_dx_dtheta(&x, &u, &self.theta).contract_first(&q);
                let dx = (gxx.transpose() * &v + gxt * nu) * 2.0;
                let gq = gx.transpose() * &q;
                for i in 0..n {
                    a[i] -= scale * dx[i];
                    for j in 0..p {
                        a[n + i * p + j] -= scale * 2.0 * gq[i] * nu[j];
                    }
                }
            }
            a_s.push(a);
            b_s.push(&wts.r_tau * u);
        }
        Ok((hermite_or_linear(times.clone(), a_s)?, hermite_or_linear(times, b_s)?))
    }
}
