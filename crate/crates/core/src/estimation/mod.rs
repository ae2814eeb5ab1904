//! Batch least-squares parameter estimation with gradient/Newton
//! switching and Armijo backtracking, measurement synthesis, and
//! Monte-Carlo covariance studies.

mod measurements;
mod montecarlo;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use measurements::{
    sample_moments, sample_times, streams, substream, synthesize_measurements, MeasurementSet,
};
pub use montecarlo::{monte_carlo, MonteCarloReport, MonteCarloSetup, Theta0Sampler, TrialOutcome, TrialSeeding};

use crate::error::{Error, Result};
use crate::model::PlantModel;
use crate::numkit::{DenseTrajectory, IntegratorConfig};
use crate::sensitivity::{propagate, simulate};

/// Knobs of the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Stop when the gradient norm falls to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Stop when an accepted step changes theta by less than this,
    /// relative to `|theta|`. Integration error puts a floor under the
    /// attainable gradient norm; this catches iterations stuck on it.
    pub step_tol: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            step_tol: 1e-12,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && self.max_iter > 0
            && self.c1 > 0.0
            && self.c1 < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.step_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid estimator settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Gradient,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    StepStalled,
    LinesearchFailed,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta_hat: DVector<f64>,
    /// Cost at the start and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub step_kinds: Vec<StepKind>,
    /// True only when the gradient tolerance was met.
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl EstimationResult {
    pub fn iterations(&self) -> usize {
        self.step_kinds.len()
    }

    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().expect("initial cost recorded")
    }
}

/// Weighted residual cost `1/2 sum r^T Sigma^-1 r`, `r = y~ - y(theta)`.
pub fn ls_cost(
    model: &dyn PlantModel,
    u: &DenseTrajectory,
    x0: &DVector<f64>,
    theta: &DVector<f64>,
    meas: &MeasurementSet,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    meas.check_span(u.t0(), u.tf())?;
    let w = meas.sigma.inverse()?;
    let x = simulate(model, x0, u, theta, cfg)?;
    let mut beta = 0.0;
    for (&t, y_obs) in meas.times.iter().zip(&meas.values) {
        let r = y_obs - model.output(&x.at(t), &u.at(t), theta);
        beta += 0.5 * r.dot(&(w * &r));
    }
    Ok(beta)
}

/// Cost, gradient and full Hessian of [`ls_cost`].
///
/// The Hessian is `sum Gamma^T W Gamma - sum_r (W r)_r d^2 y_r / d theta^2`
/// with the second output derivative assembled from `omega`, `D2_x g`,
/// `D_x D_theta g` and `D2_theta g`. Residuals come from the same plain
/// simulation as [`ls_cost`]; the augmented run supplies the sensitivities.
pub fn ls_derivatives(
    model: &dyn PlantModel,
    u: &DenseTrajectory,
    x0: &DVector<f64>,
    theta: &DVector<f64>,
    meas: &MeasurementSet,
    cfg: &IntegratorConfig,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    meas.check_span(u.t0(), u.tf())?;
    let w = meas.sigma.inverse()?;
    let d = model.dims();
    let p = d.p;
    let bundle = propagate(model, x0, u, theta, true, cfg)?;
    let plain = simulate(model, x0, u, theta, cfg)?;
    let mut beta = 0.0;
    let mut grad = DVector::zeros(p);
    let mut hess = DMatrix::zeros(p, p);
    for (&t, y_obs) in meas.times.iter().zip(&meas.values) {
        let (x, ut) = (bundle.state.at(t), u.at(t));
        let psi = bundle.psi_at(t);
        let omega = bundle.omega_at(t).expect("second order");
        let gx = model.dg_dx(&x, &ut, theta);
        let gamma = &gx * &psi + model.dg_dtheta(&x, &ut, theta);
        let r = y_obs - model.output(&plain.at(t), &ut, theta);
        let wr = w * &r;
        beta += 0.5 * r.dot(&wr);
        grad -= gamma.transpose() * &wr;
        hess += gamma.transpose() * w * &gamma;

        let gxt_p = model.d2g_dx_dtheta(&x, &ut, theta).mul_middle(&psi);
        let y2 = omega
            .left_mul(&gx)
            .add(&model.d2g_dx2(&x, &ut, theta).mul_last(&psi).mul_middle(&psi))
            .add(&gxt_p)
            .add(&gxt_p.transpose_last())
            .add(&model.d2g_dtheta2(&x, &ut, theta));
        hess -= y2.contract_first(&wr);
    }
    let hess = (&hess + hess.transpose()) * 0.5;
    Ok((beta, grad, hess))
}

/// Batch least-squares estimator: Newton steps while the Hessian is positive
/// definite, gradient steps otherwise, each with Armijo backtracking.
#[allow(clippy::too_many_arguments)]
pub fn estimate(
    model: &dyn PlantModel,
    u: &DenseTrajectory,
    x0: &DVector<f64>,
    theta0: &DVector<f64>,
    meas: &MeasurementSet,
    est: &EstimatorConfig,
    cfg: &IntegratorConfig,
) -> Result<EstimationResult> {
    est.validate()?;
    if theta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("initial parameters must be finite".into()));
    }
    let mut theta = theta0.clone();
    // costs all come from plain simulation so the trace is comparable
    // across iterations; the augmented run only supplies derivatives
    let mut beta = ls_cost(model, u, x0, &theta, meas, cfg)?;
    let (_, mut grad, mut hess) = ls_derivatives(model, u, x0, &theta, meas, cfg)?;
    let mut result = EstimationResult {
        theta_hat: theta.clone(),
        cost_trace: vec![beta],
        grad_norm_trace: vec![grad.norm()],
        step_kinds: Vec::new(),
        converged: false,
        stop_reason: StopReason::MaxIter,
    };
    let cost_at = |th: &DVector<f64>| ls_cost(model, u, x0, th, meas, cfg).unwrap_or(f64::INFINITY);

    for _ in 0..est.max_iter {
        if grad.norm() <= est.tol {
            result.converged = true;
            result.stop_reason = StopReason::GradientTolerance;
            return Ok(result);
        }
        let (kind, dir) = match hess.clone().cholesky() {
            Some(ch) => (StepKind::Newton, -ch.solve(&grad)),
            None => (StepKind::Gradient, -&grad),
        };
        let slope = grad.dot(&dir);
        let mut gamma = 1.0;
        let mut accepted = None;
        for _ in 0..=est.max_backtracks {
            let trial = &theta + &dir * gamma;
            let b = cost_at(&trial);
            if b <= beta + est.c1 * gamma * slope {
                accepted = Some((trial, b));
                break;
            }
            gamma *= est.backtrack;
        }
        let Some((next, next_beta)) = accepted else {
            result.stop_reason = StopReason::LinesearchFailed;
            return Ok(result);
        };
        let moved = (&next - &theta).norm();
        theta = next;
        beta = next_beta;
        (_, grad, hess) = ls_derivatives(model, u, x0, &theta, meas, cfg)?;
        result.theta_hat = theta.clone();
        result.cost_trace.push(beta);
        result.grad_norm_trace.push(grad.norm());
        result.step_kinds.push(kind);
        if moved <= est.step_tol * theta.norm().max(est.step_tol) {
            result.converged = grad.norm() <= est.tol;
            result.stop_reason = if result.converged {
                StopReason::GradientTolerance
            } else {
                StopReason::StepStalled
            };
            return Ok(result);
        }
    }
    if grad.norm() <= est.tol {
        result.converged = true;
        result.stop_reason = StopReason::GradientTolerance;
    }
    Ok(result)
}
