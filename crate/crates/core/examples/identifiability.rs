//! Scaling both masses of an undamped cart leaves the outputs unchanged, so
//! every experiment yields a singular information matrix. The optimizer's
//! initial perturbation reports the offending direction.

use fimax::model::{CartDoublePendulum, CartParameterization, MeasurementNoise, PlantModel};
use fimax::numkit::IntegratorConfig;
use fimax::trajopt::{perturb_initial, ControlGrid, ExtendedTrajectory, TrajectoryProblem, Weights};
use nalgebra::DVector;

fn main() -> fimax::Result<()> {
    let model = CartDoublePendulum::new(Default::default(), CartParameterization::TwoMassesUndamped);
    let theta = model.nominal_theta();
    let integrator = IntegratorConfig::default();
    let grid = ControlGrid::new(0.0, 5.0, 0.01)?;
    let eta = ExtendedTrajectory::simulate(&model, &theta, &DVector::zeros(6), grid.sinusoid(1, 0.0, 0.5)?, &integrator)?;
    let problem = TrajectoryProblem {
        model: &model,
        theta: theta.clone(),
        sigma: MeasurementNoise::cart_default(),
        x_d: eta.state(),
        weights: Weights::defaults(model.dims()),
        grid,
        integrator,
    };
    match perturb_initial(&problem, &eta, 0.1, 0.5) {
        Ok(_) => println!("identifiable"),
        Err(e) => {
            println!("{e}");
            println!("parameters {:?} = {:?}", model.parameter_names(), theta.as_slice());
        }
    }
    Ok(())
}
