//! Projection-based trajectory optimization of the E-optimal objective
//! `J = Q_p / lambda_min + 1/2 integral (x - x_d)^T Q_tau (x - x_d) + u^T R_tau u dt`.
//!
//! Each iteration linearizes the extended dynamics (state plus
//! sensitivities) and the cost along the current trajectory, solves a
//! linear-quadratic problem for a descent direction, and maps the step back
//! onto the dynamics with a feedback projection.

mod lq;
mod optimize;
mod problem;
mod projection;
mod weights;

pub use lq::{descent_direction, feedback_gain, gain_matrix, riccati_sweep, tangent_response, DescentDirection};
pub use optimize::{
    armijo_step, optimize, optimize_with, write_trace, ArmijoStep, IterationRecord, OptimizationResult, OptimizerConfig, OptimizerStop,
};
pub use problem::{
    dynamics_linearization, extended_jacobians, ControlGrid, Evaluation, ExtendedTrajectory, Linearization,
    TrajectoryProblem,
};
pub use projection::{perturb_initial, project, CurveSum};
pub use weights::Weights;
