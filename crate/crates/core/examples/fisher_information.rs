//! Fisher information and Cramer-Rao bound of a sinusoidal experiment, and
//! the singular matrix an unexcited experiment produces.

use fimax::estimation::sample_times;
use fimax::information::{cramer_rao, fim_discrete, identifiability_check, Identifiability, IDENTIFIABILITY_THRESHOLD};
use fimax::model::{CartDoublePendulum, MeasurementNoise, PlantModel};
use fimax::numkit::{DenseTrajectory, IntegratorConfig};
use fimax::sensitivity::propagate;
use nalgebra::DVector;

fn main() -> fimax::Result<()> {
    let model = CartDoublePendulum::default();
    let theta = model.nominal_theta();
    let sigma = MeasurementNoise::cart_default();
    let times = sample_times(0.0, 5.0, 30.0)?;
    let x0 = DVector::zeros(model.dims().n);

    for amplitude in [0.1, 0.0] {
        let u = DenseTrajectory::sample_uniform(0.0, 5.0, 0.01, |t| {
            DVector::from_element(1, amplitude * (std::f64::consts::TAU * 0.5 * t).sin())
        })?;
        let s = propagate(&model, &x0, &u, &theta, false, &IntegratorConfig::default())?;
        let info = fim_discrete(&model, &s.state, &u, &theta, &s.psi, &times, &sigma)?;
        println!("amplitude {amplitude}: F =\n{:.4e}", info.matrix);
        match cramer_rao(&info) {
            Ok(crb) => println!("Cramer-Rao bound =\n{crb:.4e}"),
            Err(e) => println!("{e}"),
        }
        match identifiability_check(&info, IDENTIFIABILITY_THRESHOLD) {
            Identifiability::Identifiable { ratio } => println!("identifiable, eigenvalue ratio {ratio:.3e}\n"),
            Identifiability::NonIdentifiable { null_direction, .. } => {
                println!("not identifiable along {:?}\n", null_direction.as_slice())
            }
        }
    }
    Ok(())
}
