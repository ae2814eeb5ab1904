//! Repeats the estimation under fresh noise and scattered initial guesses,
//! then compares the sample covariance with the Cramer-Rao bound.
//!
//! Usage: `monte_carlo [trials]` (default 20).

use fimax::estimation::{monte_carlo, sample_times, EstimatorConfig, MonteCarloSetup, Theta0Sampler, TrialSeeding};
use fimax::information::{cramer_rao, fim_discrete};
use fimax::model::{CartDoublePendulum, MeasurementNoise, PlantModel};
use fimax::numkit::{DenseTrajectory, IntegratorConfig};
use fimax::sensitivity::propagate;
use nalgebra::DVector;

fn main() -> fimax::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let model = CartDoublePendulum::default();
    let theta = model.nominal_theta();
    let sigma = MeasurementNoise::cart_default();
    let integrator = IntegratorConfig::default();
    let x0 = DVector::zeros(model.dims().n);
    let u = DenseTrajectory::sample_uniform(0.0, 5.0, 0.01, |t| DVector::from_element(1, 0.3 * (2.0 * t).sin()))?;

    let report = monte_carlo(&MonteCarloSetup {
        model: &model,
        u: &u,
        x0: &x0,
        theta_true: &theta,
        sampler: Theta0Sampler::UniformRelative { spread: 0.5 },
        trials,
        rate: 30.0,
        sigma: &sigma,
        weighting: None,
        seed: 3,
        seeding: TrialSeeding::PerTrial,
        estimator: EstimatorConfig::default(),
        integrator,
    })?;

    let s = propagate(&model, &x0, &u, &theta, false, &integrator)?;
    let info = fim_discrete(&model, &s.state, &u, &theta, &s.psi, &sample_times(0.0, 5.0, 30.0)?, &sigma)?;
    println!("{} trials, {} failed", report.trials.len(), report.failures());
    println!("mean {:?}", report.mean.as_slice());
    println!("sample covariance\n{:.4e}", report.covariance);
    println!("Cramer-Rao bound\n{:.4e}", cramer_rao(&info)?);
    Ok(())
}
