use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::csvio::write_table;
use crate::error::{Error, Result};
use crate::numkit::DenseTrajectory;

use super::lq::{descent_direction, feedback_gain, DescentDirection};
use super::problem::{dynamics_linearization, Evaluation, ExtendedTrajectory, TrajectoryProblem};
use super::projection::{project, CurveSum};

/// Outer-loop settings of the trajectory optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Stop once `|DJ . zeta|` drops to this.
    pub tol: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Record elapsed time in the trace; off keeps traces reproducible.
    pub record_wall_time: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tol: 0.1,
            max_iter: 100,
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            record_wall_time: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol >= 0.0
            && self.c1 > 0.0
            && self.c1 < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// An accepted Armijo step.
#[derive(Debug, Clone)]
pub struct ArmijoStep {
    pub gamma: f64,
    pub trajectory: ExtendedTrajectory,
    pub evaluation: Evaluation,
    pub backtracks: usize,
}

/// Backtracks `gamma = backtrack^j` until
/// `J(P(eta + gamma zeta)) <= J(eta) + c1 gamma DJ.zeta`.
///
/// Candidates whose projection or evaluation fails count as rejected.
pub fn armijo_step(
    problem: &TrajectoryProblem,
    eta: &ExtendedTrajectory,
    dir: &DescentDirection,
    j_current: f64,
    k: Option<&DenseTrajectory>,
    cfg: &OptimizerConfig,
) -> Result<ArmijoStep> {
    if !(dir.dj_zeta < 0.0) {
        return Err(Error::LinesearchFailed { backtracks: 0 });
    }
    let x0 = eta.x0();
    let mut gamma = 1.0;
    for backtracks in 0..=cfg.max_backtracks {
        let alpha = CurveSum::of(&eta.xbar).plus(gamma, &dir.z);
        let mu = CurveSum::of(&eta.u).plus(gamma, &dir.v);
        let candidate = project(problem, &alpha, &mu, k, &x0).and_then(|c| Ok((problem.evaluate(&c)?, c)));
        if let Ok((ev, trajectory)) = candidate {
            if ev.j <= j_current + cfg.c1 * gamma * dir.dj_zeta {
                return Ok(ArmijoStep { gamma, trajectory, evaluation: ev, backtracks });
            }
        }
        gamma *= cfg.backtrack;
    }
    Err(Error::LinesearchFailed { backtracks: cfg.max_backtracks })
}

/// One row of the optimizer trace. `gamma` is the step taken from this
/// iterate, zero on the last row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub dj_zeta: f64,
    pub gamma: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptimizerStop {
    Converged,
    MaxIter,
    /// No acceptable step; the last iterate is returned.
    LinesearchFailed,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub trajectory: ExtendedTrajectory,
    pub evaluation: Evaluation,
    pub trace: Vec<IterationRecord>,
    pub stop: OptimizerStop,
}

impl OptimizationResult {
    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Projection-based descent on `J` starting from the feasible `eta0`.
pub fn optimize(problem: &TrajectoryProblem, eta0: ExtendedTrajectory, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    optimize_with(problem, eta0, cfg, |_| {})
}

/// [`optimize`] calling `on_iter` with every trace row as it is produced.
pub fn optimize_with<F: FnMut(&IterationRecord)>(
    problem: &TrajectoryProblem,
    eta0: ExtendedTrajectory,
    cfg: &OptimizerConfig,
    mut on_iter: F,
) -> Result<OptimizationResult> {
    problem.validate()?;
    cfg.validate()?;
    let started = Instant::now();
    let w = &problem.weights;
    let mut eta = if eta0.feasible { eta0 } else { problem.simulate(&eta0.x0(), eta0.u)? };
    let mut ev = problem.evaluate(&eta)?;
    let mut trace = Vec::new();
    for iter in 0.. {
        let lin = dynamics_linearization(problem.model, &eta, &problem.theta)?;
        let (a, b) = problem.cost_linearization_at(&eta, &ev)?;
        let dir = descent_direction(&a, &b, &lin, &w.q_n, &w.r_n, &problem.grid, &problem.integrator)?;
        let mut record = IterationRecord {
            iter,
            j: ev.j,
            lambda_min: ev.lambda_min(),
            lambda_max: ev.lambda_max(),
            dj_zeta: dir.dj_zeta,
            gamma: 0.0,
            wall_time_s: 0.0,
        };
        let stamp = |r: &mut IterationRecord| {
            if cfg.record_wall_time {
                r.wall_time_s = started.elapsed().as_secs_f64();
            }
        };
        let stop = if dir.dj_zeta.abs() <= cfg.tol {
            Some(OptimizerStop::Converged)
        } else if iter >= cfg.max_iter {
            Some(OptimizerStop::MaxIter)
        } else {
            None
        };
        if let Some(stop) = stop {
            stamp(&mut record);
            on_iter(&record);
            trace.push(record);
            return Ok(OptimizationResult { trajectory: eta, evaluation: ev, trace, stop });
        }
        let k = feedback_gain(&lin, &w.q_k, &w.r_k, &problem.grid, &problem.integrator)?;
        match armijo_step(problem, &eta, &dir, ev.j, Some(&k), cfg) {
            Ok(step) => {
                record.gamma = step.gamma;
                stamp(&mut record);
                on_iter(&record);
                trace.push(record);
                eta = step.trajectory;
                ev = step.evaluation;
            }
            Err(Error::LinesearchFailed { .. }) => {
                stamp(&mut record);
                on_iter(&record);
                trace.push(record);
                return Ok(OptimizationResult {
                    trajectory: eta,
                    evaluation: ev,
                    trace,
                    stop: OptimizerStop::LinesearchFailed,
                });
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("loop exits through a stop condition")
}

/// Writes `iter,J,lambda_min,lambda_max,dJ_zeta,gamma,wall_time_s`.
pub fn write_trace<W: Write>(trace: &[IterationRecord], out: W) -> Result<()> {
    let header: Vec<String> = ["iter", "J", "lambda_min", "lambda_max", "dJ_zeta", "gamma", "wall_time_s"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_table(
        out,
        &header,
        trace
            .iter()
            .map(|r| vec![r.iter as f64, r.j, r.lambda_min, r.lambda_max, r.dj_zeta, r.gamma, r.wall_time_s]),
    )
}
