//! Reshapes a small sinusoidal input into an informative experiment by
//! maximizing the smallest eigenvalue of the Fisher information.
//!
//! Pass a path to also write the optimizer trace as CSV.

use fimax::model::{CartDoublePendulum, MeasurementNoise, PlantModel};
use fimax::numkit::IntegratorConfig;
use fimax::trajopt::{optimize_with, write_trace, ControlGrid, ExtendedTrajectory, OptimizerConfig, TrajectoryProblem, Weights};
use nalgebra::DVector;

fn main() -> fimax::Result<()> {
    let model = CartDoublePendulum::default();
    let theta = model.nominal_theta();
    let integrator = IntegratorConfig::default();
    let grid = ControlGrid::new(0.0, 5.0, 0.01)?;
    let u0 = grid.sinusoid(1, 0.1, 0.5)?;
    let eta0 = ExtendedTrajectory::simulate(&model, &theta, &DVector::zeros(6), u0, &integrator)?;

    let mut weights = Weights::defaults(model.dims());
    weights.q_n *= 100.0;
    weights.r_n *= 100.0;
    let problem = TrajectoryProblem {
        model: &model,
        theta,
        sigma: MeasurementNoise::cart_default(),
        x_d: eta0.state(),
        weights,
        grid,
        integrator,
    };

    let res = optimize_with(&problem, eta0, &OptimizerConfig::default(), |r| {
        println!(
            "iter {:>2}  J {:.4e}  lambda_min {:.4e}  lambda_max {:.4e}  DJ.zeta {:.3e}  gamma {}",
            r.iter, r.j, r.lambda_min, r.lambda_max, r.dj_zeta, r.gamma
        )
    })?;
    let first = res.trace[0];
    println!(
        "{:?} after {} iteration(s); lambda_min grew {:.0}x",
        res.stop,
        res.iterations(),
        res.evaluation.lambda_min() / first.lambda_min
    );
    if let Some(path) = std::env::args().nth(1) {
        write_trace(&res.trace, std::fs::File::create(path)?)?;
    }
    Ok(())
}
