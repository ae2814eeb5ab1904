mod common;

use common::design::{cart_problem, gateaux_pair, random_variation};
use common::{cart_x0, random_input};
use fimax::model::{CartDoublePendulum, CartParameterization, CartDoublePendulumParams, MeasurementNoise, PlantModel, ScalarLinear};
use fimax::numkit::{fd_jacobian, scaled_error, DenseTrajectory, IntegratorConfig};
use fimax::sensitivity::extended_field;
use fimax::trajopt::*;
use fimax::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sup_gap(a: &DenseTrajectory, b: impl Fn(f64) -> DVector<f64>, times: &[f64]) -> f64 {
    times.iter().map(|&t| (a.at(t) - b(t)).amax()).fold(0.0, f64::max)
}

#[test]
fn extended_jacobians_match_finite_differences() {
    let model = CartDoublePendulum::default();
    let d = model.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (x, u, th) = model.sample_point(&mut rng);
        let psi = DMatrix::from_fn(d.n, d.p, |_, _| rng.random_range(-2.0..2.0));
        let (a, b) = extended_jacobians(&model, &x, &psi, &u, &th);
        let mut xbar = DVector::zeros(d.extended());
        xbar.rows_mut(0, d.n).copy_from(&x);
        xbar.as_mut_slice()[d.n..].copy_from_slice(psi.transpose().as_slice());
        let fa = fd_jacobian(|z| extended_field(&model, z, &u, &th), &xbar, 1e-6).unwrap();
        let fb = fd_jacobian(|v| extended_field(&model, &xbar, v, &th), &u, 1e-6).unwrap();
        assert!(scaled_error(a.as_slice(), fa.as_slice()) < 1e-4);
        assert!(scaled_error(b.as_slice(), fb.as_slice()) < 1e-4);
    }
}

#[test]
fn scalar_linear_extended_jacobians() {
    let v = |x: f64| DVector::from_element(1, x);
    let (a, b) = extended_jacobians(&ScalarLinear, &v(0.3), &DMatrix::from_element(1, 1, 0.7), &v(1.0), &v(-0.4));
    assert_eq!(a, DMatrix::from_row_slice(2, 2, &[-0.4, 0.0, 1.0, -0.4]));
    assert_eq!(b, DMatrix::from_row_slice(2, 1, &[1.0, 0.0]));
}

/// Forward-Euler discretization of the scalar problem solved as a dense QP.
fn scalar_qp(a_dyn: f64, a: f64, b: f64, q: f64, r: f64, n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    // z_k = sum_{j<k} h (1 + h A)^{k-1-j} v_j, k = 0..n-1
    let m = DMatrix::from_fn(n, n, |k, j| if j < k { h * (1.0 + h * a_dyn).powi((k - 1 - j) as i32) } else { 0.0 });
    let lhs = m.transpose() * &m * q + DMatrix::identity(n, n) * r;
    let rhs = -(m.transpose() * DVector::from_element(n, a) + DVector::from_element(n, b));
    lhs.lu().solve(&rhs).unwrap().iter().copied().collect()
}

#[test]
fn scalar_descent_matches_discretized_qp() {
    let grid = ControlGrid::new(0.0, 1.0, 0.01).unwrap();
    let cfg = IntegratorConfig::default();
    let cst = |v: f64| DenseTrajectory::constant(0.0, 1.0, DVector::from_element(1, v)).unwrap();
    for (a_dyn, a, b, q, r) in [(0.0, 0.0, -1.0, 0.0, 1.0), (0.5, 1.0, -1.0, 1.0, 1.0), (-1.0, 0.3, 0.5, 2.0, 0.5)] {
        let lin = Linearization::from_samples(
            vec![0.0, 1.0],
            vec![DMatrix::from_element(1, 1, a_dyn); 2],
            vec![DMatrix::from_element(1, 1, 1.0); 2],
        )
        .unwrap();
        let qm = DMatrix::from_element(1, 1, q);
        let rm = DMatrix::from_element(1, 1, r);
        let dir = descent_direction(&cst(a), &cst(b), &lin, &qm, &rm, &grid, &cfg).unwrap();
        let oracle = scalar_qp(a_dyn, a, b, q, r, 100);
        let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (k, want) in oracle.iter().enumerate() {
            let got = dir.v.at(k as f64 / 100.0)[0];
            assert!((got - want).abs() / scale < 2e-2, "case {a_dyn} k {k}: {got} vs {want}");
        }
        assert!(dir.dj_zeta <= 0.0);
    }
}

fn cart_setup(model: &CartDoublePendulum, seed: u64, cfg: IntegratorConfig) -> (ExtendedTrajectory, TrajectoryProblem<'_>) {
    let u = random_input(seed, 5.0);
    let eta = ExtendedTrajectory::simulate(model, &model.nominal_theta(), &cart_x0(), u, &cfg).unwrap();
    let problem = cart_problem(model, eta.state(), cfg);
    (eta, problem)
}

#[test]
fn projection_fixed_point_and_idempotence() {
    let model = CartDoublePendulum::default();
    let (eta, problem) = cart_setup(&model, 4, IntegratorConfig::default());
    let lin = dynamics_linearization(&model, &eta, &problem.theta).unwrap();
    let w = &problem.weights;
    let k = feedback_gain(&lin, &w.q_k, &w.r_k, &problem.grid, &problem.integrator).unwrap();
    let x0 = eta.x0();
    let times = eta.knots();

    let p = project(&problem, &CurveSum::of(&eta.xbar), &CurveSum::of(&eta.u), Some(&k), &x0).unwrap();
    assert!(p.feasible);
    let scale = eta.xbar.values().iter().map(|v| v.amax()).fold(1.0, f64::max);
    let g = sup_gap(&p.xbar, |t| eta.xbar.at(t), &times) / scale;
    assert!(g < 1e-6, "fixed-point gap {g} (scale {scale})");

    // an infeasible curve: reprojecting its projection changes nothing
    let v = random_variation(&problem.grid, 8, 1.0);
    let bump = problem.grid.sample(|t| DVector::from_element(model.dims().extended(), 0.05 * (3.0 * t).sin())).unwrap();
    let alpha = CurveSum::of(&eta.xbar).plus(1.0, &bump);
    let mu = CurveSum::of(&eta.u).plus(1.0, &v);
    let p1 = project(&problem, &alpha, &mu, Some(&k), &x0).unwrap();
    let p2 = project(&problem, &CurveSum::of(&p1.xbar), &CurveSum::of(&p1.u), Some(&k), &x0).unwrap();
    let tol = 10.0 * problem.integrator.rel_tol * p1.xbar.values().iter().map(|v| v.amax()).fold(1.0, f64::max);
    assert!(sup_gap(&p2.xbar, |t| p1.xbar.at(t), &p1.knots()) < tol);
}

#[test]
fn zero_gain_projection_is_open_loop() {
    let model = CartDoublePendulum::default();
    let (eta, problem) = cart_setup(&model, 5, IntegratorConfig::default());
    let ext = model.dims().extended();
    let zero_k = problem.grid.sample(|_| DVector::zeros(ext)).unwrap();
    let v = random_variation(&problem.grid, 2, 1.0);
    let mu = CurveSum::of(&eta.u).plus(1.0, &v);
    let bump = problem.grid.sample(|_| DVector::from_element(ext, 1.0)).unwrap();
    let alpha = CurveSum::of(&eta.xbar).plus(1.0, &bump);
    let closed = project(&problem, &alpha, &mu, Some(&zero_k), &eta.x0()).unwrap();
    let open = project(&problem, &alpha, &mu, None, &eta.x0()).unwrap();
    let direct = problem.simulate(&eta.x0(), problem.grid.sample(|t| mu.at(t)).unwrap()).unwrap();
    let times = direct.knots();
    assert!(sup_gap(&closed.xbar, |t| direct.xbar.at(t), &times) < 1e-9);
    assert!(sup_gap(&open.xbar, |t| direct.xbar.at(t), &times) < 1e-12);
}

#[test]
fn projection_gap_is_second_order() {
    let model = CartDoublePendulum::default();
    let cfg = IntegratorConfig { rel_tol: 1e-11, abs_tol: 1e-12, ..Default::default() };
    let (eta, problem) = cart_setup(&model, 6, cfg);
    let ev = problem.evaluate(&eta).unwrap();
    let lin = dynamics_linearization(&model, &eta, &problem.theta).unwrap();
    let (a, b) = problem.cost_linearization_at(&eta, &ev).unwrap();
    let zeta = tangent_response(&lin, &a, &b, random_variation(&problem.grid, 1, 1.0), &cfg).unwrap();
    let w = &problem.weights;
    let k = feedback_gain(&lin, &w.q_k, &w.r_k, &problem.grid, &cfg).unwrap();
    let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&g| {
            let alpha = CurveSum::of(&eta.xbar).plus(g, &zeta.z);
            let p = project(&problem, &alpha, &CurveSum::of(&eta.u).plus(g, &zeta.v), Some(&k), &eta.x0()).unwrap();
            sup_gap(&p.xbar, |t| alpha.at(t), &p.knots())
        })
        .collect();
    for pair in gaps.windows(2) {
        let ratio = pair[1] / pair[0];
        assert!(ratio > 1e-3 && ratio < 3e-2, "gaps {gaps:?}");
    }
}

#[test]
fn gateaux_derivative_matches_linearization() {
    let model = CartDoublePendulum::default();
    let cfg = IntegratorConfig { rel_tol: 1e-11, abs_tol: 1e-12, ..Default::default() };
    let (eta, problem) = cart_setup(&model, 7, cfg);
    for seed in 0..2 {
        let (fd, pred) = gateaux_pair(&problem, &eta, seed, 1e-3);
        assert!((fd - pred).abs() <= 1e-3 * pred.abs(), "{fd} vs {pred}");
    }
}

#[test]
fn ascent_direction_fails_linesearch() {
    let model = CartDoublePendulum::default();
    let (eta, problem) = cart_setup(&model, 9, IntegratorConfig::default());
    let ev = problem.evaluate(&eta).unwrap();
    let lin = dynamics_linearization(&model, &eta, &problem.theta).unwrap();
    let (a, b) = problem.cost_linearization_at(&eta, &ev).unwrap();
    let w = &problem.weights;
    let dir = descent_direction(&a, &b, &lin, &w.q_n, &w.r_n, &problem.grid, &problem.integrator).unwrap();
    assert!(dir.dj_zeta < 0.0);
    let flipped_v = problem.grid.sample(|t| -dir.v.at(t)).unwrap();
    let ascent = tangent_response(&lin, &a, &b, flipped_v, &problem.integrator).unwrap();
    assert!((ascent.dj_zeta + dir.dj_zeta).abs() < 1e-6 * dir.dj_zeta.abs());
    let cfg = OptimizerConfig { max_backtracks: 8, ..Default::default() };
    assert_eq!(
        armijo_step(&problem, &eta, &ascent, ev.j, None, &cfg).unwrap_err(),
        Error::LinesearchFailed { backtracks: 0 }
    );
    // even when told it is a descent direction, no step decreases J
    let lying = DescentDirection { dj_zeta: dir.dj_zeta, ..ascent };
    assert_eq!(
        armijo_step(&problem, &eta, &lying, ev.j, None, &cfg).unwrap_err(),
        Error::LinesearchFailed { backtracks: 8 }
    );
    // the real direction is accepted on the first try or after backtracking
    let step = armijo_step(&problem, &eta, &dir, ev.j, None, &cfg).unwrap();
    assert!(step.evaluation.j < ev.j);
}

fn scalar_problem(model: &ScalarLinear, horizon: f64) -> TrajectoryProblem<'_> {
    let mut weights = Weights::defaults(model.dims());
    weights.q_p = 0.0;
    weights.q_tau = DMatrix::identity(1, 1);
    // exact curvature of J for a linear plant and no information term
    weights.q_n = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    weights.r_n = weights.r_tau.clone();
    TrajectoryProblem {
        model,
        theta: DVector::from_element(1, -1.0),
        sigma: MeasurementNoise::diagonal(&[1.0]).unwrap(),
        x_d: DenseTrajectory::constant(0.0, horizon, DVector::zeros(1)).unwrap(),
        weights,
        grid: ControlGrid::new(0.0, horizon, 0.01).unwrap(),
        integrator: IntegratorConfig::default(),
    }
}

#[test]
fn exact_local_model_takes_full_step() {
    let model = ScalarLinear;
    let problem = scalar_problem(&model, 2.0);
    let zero = problem.grid.sample(|_| DVector::zeros(1)).unwrap();
    let eta = problem.simulate(&DVector::from_element(1, 1.0), zero.clone()).unwrap();
    let res = optimize(&problem, eta, &OptimizerConfig { tol: 1e-8, max_iter: 3, ..Default::default() }).unwrap();
    assert_eq!(res.trace[0].gamma, 1.0);
    assert!(res.trace[1].dj_zeta.abs() < 1e-3 * res.trace[0].dj_zeta.abs());
    assert!(res.trace[1].j < res.trace[0].j);

    // already at the minimum: at rest on the reference with no input
    let rest = problem.simulate(&DVector::zeros(1), zero).unwrap();
    let res = optimize(&problem, rest, &OptimizerConfig::default()).unwrap();
    assert_eq!(res.iterations(), 0);
    assert_eq!(res.stop, OptimizerStop::Converged);
    assert_eq!(res.trace[0].j, 0.0);
}

#[test]
fn cart_first_step_decreases_objective() {
    let model = CartDoublePendulum::default();
    let (eta, problem) = cart_setup(&model, 10, IntegratorConfig::default());
    let res = optimize(&problem, eta, &OptimizerConfig { tol: 0.0, max_iter: 2, ..Default::default() }).unwrap();
    let t = &res.trace;
    assert!(t[0].gamma > 0.0 && t[0].dj_zeta < 0.0);
    assert!(t[1].j <= t[0].j + 1e-4 * t[0].gamma * t[0].dj_zeta);
    let mut csv = Vec::new();
    write_trace(t, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("iter,J,lambda_min,lambda_max,dJ_zeta,gamma,wall_time_s\n"));
    assert_eq!(text.lines().count(), t.len() + 1);
}

#[test]
fn perturbation_restores_information_when_possible() {
    let cfg = IntegratorConfig::default();
    let model = CartDoublePendulum::default();
    let rest = DenseTrajectory::constant(0.0, 5.0, DVector::zeros(6)).unwrap();
    let problem = cart_problem(&model, rest, cfg);
    let u0 = problem.grid.sample(|_| DVector::zeros(1)).unwrap();
    let eta = problem.simulate(&cart_x0(), u0).unwrap();
    assert!(matches!(problem.evaluate(&eta), Err(Error::SingularInformation { .. })));
    let same = perturb_initial(&problem, &eta, 0.0, 1.0).unwrap();
    assert_eq!(same.xbar.values(), eta.xbar.values());
    let moved = perturb_initial(&problem, &eta, 0.5, 0.7).unwrap();
    assert!(problem.evaluate(&moved).unwrap().lambda_min() > 0.0);

    let undamped = CartDoublePendulum::new(CartDoublePendulumParams::default(), CartParameterization::TwoMassesUndamped);
    let problem = cart_problem(&undamped, DenseTrajectory::constant(0.0, 5.0, DVector::zeros(6)).unwrap(), cfg);
    let eta = problem.simulate(&cart_x0(), problem.grid.sample(|_| DVector::zeros(1)).unwrap()).unwrap();
    match perturb_initial(&problem, &eta, 0.5, 0.7) {
        Err(Error::StillSingular { null_direction }) => {
            // the direction that scales both masses together
            let th = undamped.nominal_theta();
            let cos = (null_direction[0] * th[0] + null_direction[1] * th[1]).abs() / th.norm();
            assert!(cos > 1.0 - 1e-6, "{null_direction:?}");
        }
        other => panic!("expected StillSingular, got {other:?}"),
    }
}
