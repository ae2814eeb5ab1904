//! Batch least-squares estimation of cart mass and damping from synthetic
//! noisy measurements, starting from a poor guess.

use fimax::estimation::{estimate, synthesize_measurements, EstimatorConfig};
use fimax::model::{CartDoublePendulum, MeasurementNoise, PlantModel};
use fimax::numkit::{DenseTrajectory, IntegratorConfig};
use nalgebra::{dvector, DVector};

fn main() -> fimax::Result<()> {
    let model = CartDoublePendulum::default();
    let theta_true = model.nominal_theta();
    let cfg = IntegratorConfig::default();
    let u = DenseTrajectory::sample_uniform(0.0, 5.0, 0.01, |t| DVector::from_element(1, 0.3 * (2.0 * t).sin()))?;
    let x0 = DVector::zeros(model.dims().n);
    let sigma = MeasurementNoise::cart_default();

    let meas = synthesize_measurements(&model, &u, &x0, &theta_true, 30.0, &sigma, 11, &cfg)?;
    let theta0 = dvector![0.15, 0.2];
    let res = estimate(&model, &u, &x0, &theta0, &meas, &EstimatorConfig::default(), &cfg)?;

    for (k, (c, g)) in res.cost_trace.iter().zip(&res.grad_norm_trace).enumerate() {
        println!("{k:>3}  cost {c:.6e}  |grad| {g:.3e}");
    }
    println!("true     {:?}", theta_true.as_slice());
    println!("estimate {:?} ({:?})", res.theta_hat.as_slice(), res.stop_reason);
    Ok(())
}
