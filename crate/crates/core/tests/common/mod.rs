#![allow(dead_code)]

use fimax::numkit::{DenseTrajectory, IntegratorConfig};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sum of two sinusoids with seeded amplitudes, frequencies and phases.
pub fn random_input(seed: u64, horizon: f64) -> DenseTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps: Vec<(f64, f64, f64)> = (0..2)
        .map(|_| {
            (
                rng.random_range(0.5..2.0),
                rng.random_range(0.2..1.2),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    DenseTrajectory::sample_uniform(0.0, horizon, 0.01, |t| {
        let v = comps
            .iter()
            .map(|(a, f, ph)| a * (std::f64::consts::TAU * f * t + ph).sin())
            .sum();
        DVector::from_element(1, v)
    })
    .unwrap()
}

pub fn tight() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-13,
        ..Default::default()
    }
}

pub fn cart_x0() -> DVector<f64> {
    DVector::zeros(6)
}

/// `max |a - b| / max(max |b|, 1)` over paired vectors.
pub fn rel_gap(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.amax()).fold(1.0, f64::max);
    num / den
}

pub mod design {
    use fimax::model::{CartDoublePendulum, MeasurementNoise, PlantModel};
    use fimax::numkit::{DenseTrajectory, IntegratorConfig};
    use fimax::trajopt::{
        dynamics_linearization, feedback_gain, project, tangent_response, ControlGrid, CurveSum, ExtendedTrajectory,
        TrajectoryProblem, Weights,
    };
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn cart_problem<'a>(model: &'a CartDoublePendulum, x_d: DenseTrajectory, cfg: IntegratorConfig) -> TrajectoryProblem<'a> {
        TrajectoryProblem {
            model,
            theta: model.nominal_theta(),
            sigma: MeasurementNoise::cart_default(),
            weights: Weights::defaults(model.dims()),
            grid: ControlGrid::new(x_d.t0(), x_d.tf(), 0.01).unwrap(),
            x_d,
            integrator: cfg,
        }
    }

    /// Seeded smooth input perturbation on the control grid.
    pub fn random_variation(grid: &ControlGrid, seed: u64, scale: f64) -> DenseTrajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.2..2.0), rng.random_range(0.0..6.3)))
            .collect();
        grid.sample(|t| {
            let v: f64 = c.iter().map(|(a, f, ph)| a * (std::f64::consts::TAU * f * t + ph).sin()).sum();
            DVector::from_element(1, scale * v)
        })
        .unwrap()
    }

    /// `(finite-difference, predicted)` directional derivative of `J` along
    /// the tangent direction generated by a random input variation.
    pub fn gateaux_pair(problem: &TrajectoryProblem, eta: &ExtendedTrajectory, seed: u64, h: f64) -> (f64, f64) {
        let ev = problem.evaluate(eta).unwrap();
        let lin = dynamics_linearization(problem.model, eta, &problem.theta).unwrap();
        let (a, b) = problem.cost_linearization_at(eta, &ev).unwrap();
        let v = random_variation(&problem.grid, seed, 0.5);
        let zeta = tangent_response(&lin, &a, &b, v, &problem.integrator).unwrap();
        let w = &problem.weights;
        let k = feedback_gain(&lin, &w.q_k, &w.r_k, &problem.grid, &problem.integrator).unwrap();
        let j = |g: f64| {
            let alpha = CurveSum::of(&eta.xbar).plus(g, &zeta.z);
            let mu = CurveSum::of(&eta.u).plus(g, &zeta.v);
            let p = project(problem, &alpha, &mu, Some(&k), &eta.x0()).unwrap();
            problem.objective(&p).unwrap()
        };
        ((j(h) - j(-h)) / (2.0 * h), zeta.dj_zeta)
    }
}
