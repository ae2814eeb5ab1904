use fimax::model::{
    validate_derivatives, CartDoublePendulum, CartDoublePendulumParams, CartParameterization, Dims,
    PlantModel, ScalarLinear,
};
use fimax::numkit::{integrate, step_sizes, IntegratorConfig, Tensor3};
use fimax::Error;
use nalgebra::{DMatrix, DMatrix as M, DVector};
use num_dual::{Dual64, DualNum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn zero_u() -> DVector<f64> {
    DVector::zeros(1)
}

#[test]
fn cart_derivatives_pass_fd_validation() {
    for parameterization in [CartParameterization::MassDamping, CartParameterization::TwoMassesUndamped] {
        let model = CartDoublePendulum::new(CartDoublePendulumParams::default(), parameterization);
        let report = validate_derivatives(&model, 100, 11).unwrap();
        assert!(report.passed(), "{report:?}");
    }
}

#[test]
fn output_ignores_velocities_and_parameters() {
    let model = CartDoublePendulum::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (x, u, th) = model.sample_point(&mut rng);
        assert_eq!(model.dg_dtheta(&x, &u, &th).amax(), 0.0);
        let dgdx = model.dg_dx(&x, &u, &th);
        for col in 3..6 {
            assert_eq!(dgdx.column(col).amax(), 0.0);
        }
    }
}

/// Independent Euler-Lagrange assembly from link kinematics.
struct LagrangeOracle {
    p: CartDoublePendulumParams,
    m1: f64,
    c: f64,
}

impl LagrangeOracle {
    fn positions(&self, q: &[Dual64]) -> [(Dual64, Dual64); 2] {
        let p = &self.p;
        let r1 = p.s1 - p.bearing_offset;
        let r2 = p.s2 - p.bearing_offset;
        let d1 = p.l1 - 2.0 * p.bearing_offset;
        let (x, a, b) = (q[0], q[1], q[1] + q[2]);
        [
            (x + a.sin() * r1, -a.cos() * r1),
            (x + a.sin() * d1 + b.sin() * r2, -a.cos() * d1 - b.cos() * r2),
        ]
    }

    fn lagrangian(&self, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
        // link velocities as the directional derivative of positions along qd
        let lifted: Vec<Dual64> = q.iter().zip(qd.iter()).map(|(&a, &b)| Dual64::new(a, b)).collect();
        let pos = self.positions(&lifted);
        let masses = [self.m1, self.p.m2];
        let inertia = [
            self.m1 * (self.p.l1.powi(2) + self.p.w1.powi(2)) / 12.0,
            self.p.m2 * (self.p.l2.powi(2) + self.p.w2.powi(2)) / 12.0,
        ];
        let omega = [qd[1], qd[1] + qd[2]];
        let mut lag = 0.0;
        for i in 0..2 {
            let (vx, vy) = (pos[i].0.eps, pos[i].1.eps);
            lag += 0.5 * masses[i] * (vx * vx + vy * vy) + 0.5 * inertia[i] * omega[i] * omega[i];
            lag -= masses[i] * self.p.gravity * pos[i].1.re;
        }
        lag
    }

    /// Angular accelerations given cart acceleration `u`.
    fn accelerations(&self, state: &DVector<f64>, u: f64) -> (f64, f64) {
        let q = state.rows(0, 3).into_owned();
        let qd = state.rows(3, 3).into_owned();
        let h = 1e-4;
        let l = |q: &DVector<f64>, qd: &DVector<f64>| self.lagrangian(q, qd);
        let e = |i: usize| {
            let mut v = DVector::zeros(3);
            v[i] = 1.0;
            v
        };
        // d2L/dqd_i dqd_j, d2L/dqd_i dq_j, dL/dq_i
        let mut mass = M::zeros(3, 3);
        let mut mixed = M::zeros(3, 3);
        let mut dldq = DVector::zeros(3);
        for i in 0..3 {
            dldq[i] = (l(&(&q + e(i) * h), &qd) - l(&(&q - e(i) * h), &qd)) / (2.0 * h);
            for j in 0..3 {
                let d = |dq: &DVector<f64>, dqd: &DVector<f64>| l(&(&q + dq), &(&qd + dqd));
                let z = DVector::zeros(3);
                let (ei, ej) = (e(i) * h, e(j) * h);
                mass[(i, j)] = (d(&z, &(&ei + &ej)) - d(&z, &(&ei - &ej)) - d(&z, &(-&ei + &ej))
                    + d(&z, &(-&ei - &ej)))
                    / (4.0 * h * h);
                mixed[(i, j)] =
                    (d(&ej, &ei) - d(&-&ej, &ei) - d(&ej, &-&ei) + d(&-&ej, &-&ei)) / (4.0 * h * h);
            }
        }
        let gen_force = DVector::from_vec(vec![0.0, -self.c * qd[1], -self.c * qd[2]]);
        let rhs = gen_force + dldq - mixed * &qd;
        // rows for the two angles, with x acceleration fixed to u
        let a = mass.view((1, 1), (2, 2)).into_owned();
        let b = DVector::from_vec(vec![rhs[1] - mass[(1, 0)] * u, rhs[2] - mass[(2, 0)] * u]);
        let sol = a.lu().solve(&b).unwrap();
        (sol[0], sol[1])
    }
}

#[test]
fn cart_matches_numeric_euler_lagrange() {
    let model = CartDoublePendulum::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let (x, u, th) = model.sample_point(&mut rng);
        let oracle = LagrangeOracle {
            p: model.params,
            m1: th[0],
            c: th[1] * 1e-3,
        };
        let (a1, a2) = oracle.accelerations(&x, u[0]);
        let xd = model.dynamics(&x, &u, &th);
        let scale = xd[4].abs().max(xd[5].abs()).max(1.0);
        assert!((xd[4] - a1).abs() / scale < 1e-5, "{} vs {}", xd[4], a1);
        assert!((xd[5] - a2).abs() / scale < 1e-5, "{} vs {}", xd[5], a2);
    }
}

fn energy(model: &CartDoublePendulum, x: &DVector<f64>, th: &DVector<f64>) -> f64 {
    model.kinetic_energy(x, th) + model.potential_energy(x, th)
}

#[test]
fn undamped_free_swing_conserves_energy() {
    let model = CartDoublePendulum::new(
        CartDoublePendulumParams::default(),
        CartParameterization::TwoMassesUndamped,
    );
    let th = model.nominal_theta();
    let x0 = DVector::from_vec(vec![0.0, 1.2, -0.8, 0.0, 0.5, 2.0]);
    let cfg = IntegratorConfig {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        ..Default::default()
    };
    let tr = integrate(|_, x| model.dynamics(x, &zero_u(), &th), &x0, (0.0, 5.0), &cfg).unwrap();
    let e0 = energy(&model, &x0, &th);
    let worst = tr
        .values()
        .iter()
        .map(|x| ((energy(&model, x, &th) - e0) / e0.abs()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "relative energy drift {worst}");
    // swinging double pendulum needs varying steps
    let h = step_sizes(&tr);
    let mean = h.iter().sum::<f64>() / h.len() as f64;
    let var = h.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / h.len() as f64;
    assert!(var.sqrt() > 0.0);
}

#[test]
fn damping_dissipates_energy() {
    let model = CartDoublePendulum::default();
    let th = DVector::from_vec(vec![0.085, 50.0]);
    let x0 = DVector::from_vec(vec![0.0, 1.0, 0.5, 0.0, 0.0, 0.0]);
    let cfg = IntegratorConfig::default();
    let tr = integrate(|_, x| model.dynamics(x, &zero_u(), &th), &x0, (0.0, 5.0), &cfg).unwrap();
    let energies: Vec<f64> = tr.values().iter().map(|x| energy(&model, x, &th)).collect();
    for w in energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1e-3));
    }
    assert!(energies.last().unwrap() < &energies[0]);
}

/// Wraps a model and corrupts D_x f.
struct Faulty<Mdl>(Mdl);

macro_rules! delegate {
    ($($name:ident -> $ret:ty),*) => {
        $(fn $name(&self, x: &DVector<f64>, u: &DVector<f64>, th: &DVector<f64>) -> $ret {
            self.0.$name(x, u, th)
        })*
    };
}

impl<Mdl: PlantModel> PlantModel for Faulty<Mdl> {
    fn dims(&self) -> Dims {
        self.0.dims()
    }
    fn name(&self) -> &str {
        "faulty"
    }
    fn df_dx(&self, x: &DVector<f64>, u: &DVector<f64>, th: &DVector<f64>) -> DMatrix<f64> {
        self.0.df_dx(x, u, th) * 1.01
    }
    delegate!(dynamics -> DVector<f64>, output -> DVector<f64>, df_du -> DMatrix<f64>,
        df_dtheta -> DMatrix<f64>, d2f_dx2 -> Tensor3, d2f_dx_dtheta -> Tensor3,
        d2f_dtheta2 -> Tensor3, d2f_dx_du -> Tensor3, d2f_dtheta_du -> Tensor3,
        dg_dx -> DMatrix<f64>, dg_dtheta -> DMatrix<f64>, d2g_dx2 -> Tensor3,
        d2g_dx_dtheta -> Tensor3, d2g_dtheta2 -> Tensor3);
    fn sample_point(&self, rng: &mut dyn rand::RngCore) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let th = 1.0 + rng.random_range(0.0..2.0);
        let (x, u, _) = self.0.sample_point(rng);
        (x, u, DVector::from_element(self.0.dims().p, th))
    }
}

#[test]
fn injected_fault_is_named() {
    match validate_derivatives(&Faulty(ScalarLinear), 5, 1) {
        Err(Error::ValidationFailed { derivative, .. }) => assert_eq!(derivative, "D_x f"),
        other => panic!("expected failure, got {other:?}"),
    }
    match validate_derivatives(&Faulty(CartDoublePendulum::default()), 5, 1) {
        Err(Error::ValidationFailed { derivative, .. }) => assert!(derivative.contains("D_x f")),
        other => panic!("expected failure, got {other:?}"),
    }
}
