use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::information::{identifiability_check, Identifiability, IDENTIFIABILITY_THRESHOLD};
use crate::numkit::{integrate_with_breakpoints, merge_times, DenseTrajectory};
use crate::sensitivity::extended_field;

use super::lq::gain_matrix;
use super::problem::{interior, ExtendedTrajectory, TrajectoryProblem};

/// `sum_k c_k * curve_k(t)`, e.g. `eta + gamma * zeta` without resampling.
#[derive(Debug, Clone, Default)]
pub struct CurveSum<'a> {
    terms: Vec<(f64, &'a DenseTrajectory)>,
}

impl<'a> CurveSum<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of(curve: &'a DenseTrajectory) -> Self {
        Self::new().plus(1.0, curve)
    }

    pub fn plus(mut self, scale: f64, curve: &'a DenseTrajectory) -> Self {
        self.terms.push((scale, curve));
        self
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        let mut it = self.terms.iter();
        let (c, first) = it.next().expect("empty curve sum");
        let mut out = first.at(t) * *c;
        for (c, curve) in it {
            out.axpy(*c, &curve.at(t), 1.0);
        }
        out
    }

    pub fn knots(&self) -> Vec<f64> {
        self.terms
            .iter()
            .fold(Vec::new(), |acc, (_, c)| merge_times(&acc, c.times(), 1e-12))
    }
}

/// Maps a possibly infeasible `(alpha, mu)` onto the dynamics.
///
/// The closed loop `u = mu + K (alpha - xbar)` is integrated from
/// `(x0, psi = 0)`, its input is sampled on the control grid, and the
/// sampled input is re-simulated open loop. With `k = None` this reduces to
/// simulating `mu` sampled on the grid.
pub fn project(
    problem: &TrajectoryProblem,
    alpha: &CurveSum,
    mu: &CurveSum,
    k: Option<&DenseTrajectory>,
    x0: &DVector<f64>,
) -> Result<ExtendedTrajectory> {
    let d = problem.dims();
    let grid = &problem.grid;
    let u = match k {
        None => grid.sample(|t| mu.at(t))?,
        Some(k) => {
            let ext = d.extended();
            let control = |t: f64, xbar: &DVector<f64>| mu.at(t) + gain_matrix(k, d.m, ext, t) * (alpha.at(t) - xbar);
            let knots = merge_times(&merge_times(&alpha.knots(), &mu.knots(), 1e-12), grid.times(), 1e-12);
            let mut xbar0 = DVector::zeros(ext);
            xbar0.rows_mut(0, d.n).copy_from(x0);
            let closed = integrate_with_breakpoints(
                |t, xbar| extended_field(problem.model, xbar, &control(t, xbar), &problem.theta),
                &xbar0,
                (grid.t0(), grid.tf()),
                &interior(&knots),
                &problem.integrator,
            )?;
            grid.sample(|t| control(t, &closed.at(t)))?
        }
    };
    problem.simulate(x0, u)
}

/// Adds `amplitude * sin(2 pi frequency t)` to every input channel and
/// re-simulates. Fails with [`Error::StillSingular`] when the result still
/// carries no information along some parameter direction.
///
/// A zero amplitude returns `eta` untouched.
pub fn perturb_initial(
    problem: &TrajectoryProblem,
    eta: &ExtendedTrajectory,
    amplitude: f64,
    frequency: f64,
) -> Result<ExtendedTrajectory> {
    if amplitude == 0.0 {
        return Ok(eta.clone());
    }
    let dither = problem.grid.sinusoid(problem.dims().m, amplitude, frequency)?;
    let perturbed = project(problem, &CurveSum::new(), &CurveSum::of(&eta.u).plus(1.0, &dither), None, &eta.x0())?;
    let info = problem.information(&perturbed)?;
    match identifiability_check(&info, IDENTIFIABILITY_THRESHOLD) {
        Identifiability::Identifiable { .. } => Ok(perturbed),
        Identifiability::NonIdentifiable { null_direction, .. } => Err(Error::StillSingular {
            null_direction: null_direction.iter().copied().collect(),
        }),
    }
}
