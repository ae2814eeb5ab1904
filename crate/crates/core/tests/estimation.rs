mod common;

use common::{cart_x0, random_input};
use fimax::estimation::{
    estimate, ls_cost, ls_derivatives, monte_carlo, sample_times, synthesize_measurements, EstimatorConfig,
    MeasurementSet, MonteCarloSetup, StepKind, Theta0Sampler, TrialSeeding,
};
use fimax::information::fim_discrete;
use fimax::model::{CartDoublePendulum, MeasurementNoise, PlantModel};
use fimax::numkit::{DenseTrajectory, IntegratorConfig};
use fimax::sensitivity::{propagate, simulate};
use nalgebra::{DMatrix, DVector};

fn setup(seed: u64) -> (CartDoublePendulum, DenseTrajectory, DVector<f64>) {
    let model = CartDoublePendulum::default();
    let theta = model.nominal_theta();
    (model, random_input(seed, 5.0), theta)
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

#[test]
fn exact_outputs_give_zero_cost_and_gradient() {
    let (model, u, theta) = setup(0);
    let zero = MeasurementNoise::new(DMatrix::zeros(2, 2)).unwrap();
    let clean = synthesize_measurements(&model, &u, &cart_x0(), &theta, 30.0, &zero, 1, &cfg()).unwrap();
    let sigma = MeasurementNoise::cart_default();
    let meas = MeasurementSet::new(clean.times.clone(), clean.values.clone(), sigma.clone()).unwrap();
    assert_eq!(ls_cost(&model, &u, &cart_x0(), &theta, &meas, &cfg()).unwrap(), 0.0);
    let (beta, grad, hess) = ls_derivatives(&model, &u, &cart_x0(), &theta, &meas, &cfg()).unwrap();
    assert_eq!(beta, 0.0);
    assert_eq!(grad.amax(), 0.0);
    let b = propagate(&model, &cart_x0(), &u, &theta, true, &cfg()).unwrap();
    let fim = fim_discrete(&model, &b.state, &u, &theta, &b.psi, &meas.times, &sigma).unwrap();
    assert!((hess - fim.matrix.clone()).amax() < 1e-12 * fim.matrix.amax());
    // zero covariance reproduces outputs exactly
    let x = simulate(&model, &cart_x0(), &u, &theta, &cfg()).unwrap();
    for (t, y) in clean.times.iter().zip(&clean.values) {
        assert_eq!(*y, model.output(&x.at(*t), &u.at(*t), &theta));
    }
    // and the estimator is already stationary
    let r = estimate(&model, &u, &cart_x0(), &theta, &meas, &EstimatorConfig::default(), &cfg()).unwrap();
    assert!(r.converged);
    assert_eq!(r.iterations(), 0);
}

#[test]
fn unit_residual_costs_one() {
    let (model, u, theta) = setup(0);
    let x = simulate(&model, &cart_x0(), &u, &theta, &cfg()).unwrap();
    let y = model.output(&x.at(2.0), &u.at(2.0), &theta) + DVector::from_element(2, 1.0);
    let meas = MeasurementSet::new(vec![2.0], vec![y], MeasurementNoise::diagonal(&[1.0, 1.0]).unwrap()).unwrap();
    let beta = ls_cost(&model, &u, &cart_x0(), &theta, &meas, &cfg()).unwrap();
    assert!((beta - 1.0).abs() < 1e-12);
}

#[test]
fn cost_follows_chi_square_mean() {
    let (model, u, theta) = setup(1);
    let sigma = MeasurementNoise::cart_default();
    let mean: f64 = (0..100)
        .map(|seed| {
            let m = synthesize_measurements(&model, &u, &cart_x0(), &theta, 30.0, &sigma, seed, &cfg()).unwrap();
            ls_cost(&model, &u, &cart_x0(), &theta, &m, &cfg()).unwrap()
        })
        .sum::<f64>()
        / 100.0;
    let expected = 0.5 * 2.0 * 150.0;
    assert!((mean - expected).abs() < 0.1 * expected, "{mean}");
}

#[test]
fn synthesized_noise_has_requested_covariance() {
    let model = fimax::model::ScalarLinear;
    let u = DenseTrajectory::constant(0.0, 1.0, DVector::zeros(1)).unwrap();
    let sigma = MeasurementNoise::diagonal(&[0.04]).unwrap();
    let m = synthesize_measurements(&model, &u, &DVector::zeros(1), &DVector::zeros(1), 10_000.0, &sigma, 5, &cfg()).unwrap();
    assert_eq!(m.len(), 10_000);
    let var = m.values.iter().map(|v| v[0] * v[0]).sum::<f64>() / m.len() as f64;
    assert!((var - 0.04).abs() < 0.05 * 0.04, "{var}");
    let again = synthesize_measurements(&model, &u, &DVector::zeros(1), &DVector::zeros(1), 10_000.0, &sigma, 5, &cfg()).unwrap();
    assert_eq!(m, again);
}

#[test]
fn derivatives_match_finite_differences() {
    let (model, u, theta) = setup(2);
    let sigma = MeasurementNoise::cart_default();
    let meas = synthesize_measurements(&model, &u, &cart_x0(), &theta, 30.0, &sigma, 3, &cfg()).unwrap();
    let tight = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-13, ..Default::default() };
    // away from the optimum so both Hessian terms matter
    let at = DVector::from_vec(vec![0.08, 0.6]);
    let (_, grad, hess) = ls_derivatives(&model, &u, &cart_x0(), &at, &meas, &tight).unwrap();
    let bump = |j: usize, d: f64| {
        let mut t = at.clone();
        t[j] += d;
        t
    };
    for j in 0..2 {
        let h = 1e-6 * at[j];
        let fd = (ls_cost(&model, &u, &cart_x0(), &bump(j, h), &meas, &tight).unwrap()
            - ls_cost(&model, &u, &cart_x0(), &bump(j, -h), &meas, &tight).unwrap())
            / (2.0 * h);
        assert!((grad[j] - fd).abs() < 1e-4 * grad.amax(), "grad {j}: {} vs {fd}", grad[j]);
        let gp = ls_derivatives(&model, &u, &cart_x0(), &bump(j, h), &meas, &tight).unwrap().1;
        let gm = ls_derivatives(&model, &u, &cart_x0(), &bump(j, -h), &meas, &tight).unwrap().1;
        let col = (gp - gm) / (2.0 * h);
        assert!((hess.column(j) - &col).amax() < 1e-3 * hess.amax(), "hess col {j}");
    }
    assert_eq!(hess[(0, 1)], hess[(1, 0)]);
}

#[test]
fn noiseless_recovery_from_perturbed_start() {
    let (model, u, theta) = setup(4);
    let zero = MeasurementNoise::new(DMatrix::zeros(2, 2)).unwrap();
    let clean = synthesize_measurements(&model, &u, &cart_x0(), &theta, 30.0, &zero, 0, &cfg()).unwrap();
    let meas = MeasurementSet::new(clean.times, clean.values, MeasurementNoise::cart_default()).unwrap();
    for (s0, s1) in [(1.5, 0.5), (0.5, 1.5), (1.5, 1.5), (0.5, 0.5)] {
        let theta0 = DVector::from_vec(vec![theta[0] * s0, theta[1] * s1]);
        let r = estimate(&model, &u, &cart_x0(), &theta0, &meas, &EstimatorConfig::default(), &cfg()).unwrap();
        let rel = ((&r.theta_hat - &theta).component_div(&theta)).amax();
        assert!(rel < 1e-6, "start {theta0}: rel {rel}, {:?}", r.stop_reason);
        assert!(r.iterations() <= 25);
        assert!(r.cost_trace.windows(2).all(|w| w[1] <= w[0]));
        // Newton near the optimum contracts the gradient faster than linearly
        let g = &r.grad_norm_trace;
        let n = g.len();
        if n >= 4 && g[n - 1] > 0.0 {
            assert!(g[n - 2] / g[n - 3] < 0.5 || g[n - 1] < 1e-6);
        }
        assert!(r.step_kinds.iter().any(|k| *k == StepKind::Newton));
    }
}

#[test]
fn noisy_estimate_descends() {
    let (model, u, theta) = setup(5);
    let meas = synthesize_measurements(&model, &u, &cart_x0(), &theta, 30.0, &MeasurementNoise::cart_default(), 8, &cfg()).unwrap();
    let theta0 = DVector::from_vec(vec![0.1, 0.3]);
    let r = estimate(&model, &u, &cart_x0(), &theta0, &meas, &EstimatorConfig::default(), &cfg()).unwrap();
    assert!(r.final_cost() < r.cost_trace[0]);
    assert!(r.cost_trace.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn measurement_csv_roundtrip() {
    let (model, u, theta) = setup(6);
    let sigma = MeasurementNoise::cart_default();
    let m = synthesize_measurements(&model, &u, &cart_x0(), &theta, 30.0, &sigma, 2, &cfg()).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    assert!(buf.starts_with(b"t,y1,y2\n"));
    let back = MeasurementSet::read_csv(buf.as_slice(), sigma.clone()).unwrap();
    assert_eq!(back, m);
    assert!(MeasurementSet::read_csv("t,a,b\n0.1,1,2\n".as_bytes(), sigma).is_err());
    assert_eq!(sample_times(0.0, 5.0, 30.0).unwrap().len(), 150);
}

#[test]
fn monte_carlo_degenerate_cases() {
    let (model, u, theta) = setup(7);
    let base = |sigma: &MeasurementNoise, seeding| {
        monte_carlo(&MonteCarloSetup {
            model: &model,
            u: &u,
            x0: &cart_x0(),
            theta_true: &theta,
            sampler: Theta0Sampler::UniformRelative { spread: 0.3 },
            trials: 2,
            rate: 30.0,
            sigma,
            weighting: None,
            seed: 11,
            seeding,
            estimator: EstimatorConfig::default(),
            integrator: cfg(),
        })
        .unwrap()
    };
    let noisy = MeasurementNoise::cart_default();
    let shared = base(&noisy, TrialSeeding::Shared);
    assert_eq!(shared.covariance.amax(), 0.0);
    let independent = base(&noisy, TrialSeeding::PerTrial);
    assert!(independent.covariance.amax() > 0.0);
    assert_eq!(independent.failures(), 0);
    let again = base(&noisy, TrialSeeding::PerTrial);
    assert_eq!(again.covariance, independent.covariance);
    // without noise, starting at the truth, every trial stays there
    let zero = MeasurementNoise::new(DMatrix::zeros(2, 2)).unwrap();
    let clean = monte_carlo(&MonteCarloSetup {
        model: &model,
        u: &u,
        x0: &cart_x0(),
        theta_true: &theta,
        sampler: Theta0Sampler::Fixed { theta0: theta.iter().copied().collect() },
        trials: 3,
        rate: 30.0,
        sigma: &zero,
        weighting: Some(&noisy),
        seed: 1,
        seeding: TrialSeeding::PerTrial,
        estimator: EstimatorConfig::default(),
        integrator: cfg(),
    })
    .unwrap();
    assert_eq!(clean.covariance.amax(), 0.0);
    assert_eq!(clean.converged(), 3);
}
