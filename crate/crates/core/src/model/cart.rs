//! Cart with a two-link pendulum hanging from it; the cart acceleration is
//! the input.
//!
//! State `(x, phi1, phi2, xdot, phi1dot, phi2dot)`: cart position, link-1
//! angle from the hanging equilibrium, link-2 angle relative to link 1, and
//! their rates. Outputs are the absolute link angles `(phi1, phi1 + phi2)`.
//! Each joint carries viscous damping `-c * phi_i_dot` with one shared `c`.

use nalgebra::{DMatrix, DVector};
use num_dual::DualNum;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ad::{self, Arg, DualFn};
use super::{Dims, PlantModel};
use crate::numkit::Tensor3;

/// Physical constants of the cart double pendulum (SI unless noted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartDoublePendulumParams {
    /// Link-1 mass, kg (used when it is not an estimated parameter).
    pub m1: f64,
    /// Link-2 mass, kg.
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub w1: f64,
    pub w2: f64,
    /// Distance from a link's end to its bearing axis.
    pub bearing_offset: f64,
    /// Center-of-mass position measured from the link's upper end.
    pub s1: f64,
    pub s2: f64,
    /// Joint damping in g/s (used when it is not an estimated parameter).
    pub c: f64,
    pub gravity: f64,
}

impl Default for CartDoublePendulumParams {
    fn default() -> Self {
        Self {
            m1: 0.085,
            m2: 0.0847,
            l1: 0.305,
            l2: 0.305,
            w1: 0.0445,
            w2: 0.0381,
            bearing_offset: 0.0127,
            s1: 0.146,
            s2: 0.125,
            c: 0.50,
            gravity: 9.81,
        }
    }
}

impl CartDoublePendulumParams {
    /// Pivot to center-of-mass distance of link 1.
    pub fn r1(&self) -> f64 {
        self.s1 - self.bearing_offset
    }

    pub fn r2(&self) -> f64 {
        self.s2 - self.bearing_offset
    }

    /// Distance between the two bearing axes on link 1.
    pub fn joint_spacing(&self) -> f64 {
        self.l1 - 2.0 * self.bearing_offset
    }

    /// Centroidal inertia per unit mass, modelling each link as a uniform
    /// rectangular plate.
    pub fn inertia_per_mass(&self) -> (f64, f64) {
        (
            (self.l1 * self.l1 + self.w1 * self.w1) / 12.0,
            (self.l2 * self.l2 + self.w2 * self.w2) / 12.0,
        )
    }

    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            self.m1,
            self.m2,
            self.l1,
            self.l2,
            self.w1,
            self.w2,
            self.r1(),
            self.r2(),
            self.joint_spacing(),
            self.gravity,
        ];
        if positive.iter().all(|v| v.is_finite() && *v > 0.0) && self.c >= 0.0 {
            Ok(())
        } else {
            Err(crate::Error::InvalidConfig(format!(
                "cart parameters must be positive: {self:?}"
            )))
        }
    }
}

/// Which physical constants form the estimated parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CartParameterization {
    /// `theta = (m1 [kg], c [g/s])`.
    #[default]
    MassDamping,
    /// `theta = (m1 [kg], m2 [kg])` with undamped joints.
    TwoMassesUndamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartDoublePendulum {
    pub params: CartDoublePendulumParams,
    pub parameterization: CartParameterization,
}

impl Default for CartDoublePendulum {
    fn default() -> Self {
        Self::new(CartDoublePendulumParams::default(), CartParameterization::MassDamping)
    }
}

struct Dynamics<'a>(&'a CartDoublePendulum);

impl DualFn for Dynamics<'_> {
    fn out_dim(&self) -> usize {
        6
    }

    fn eval<T: DualNum<Primitive = f64> + Copy>(&self, x: &[T], u: &[T], theta: &[T]) -> Vec<T> {
        self.0.vector_field(x, u[0], theta)
    }
}

impl CartDoublePendulum {
    pub fn new(params: CartDoublePendulumParams, parameterization: CartParameterization) -> Self {
        Self {
            params,
            parameterization,
        }
    }

    /// Parameter vector holding the configured physical values.
    pub fn nominal_theta(&self) -> DVector<f64> {
        match self.parameterization {
            CartParameterization::MassDamping => DVector::from_vec(vec![self.params.m1, self.params.c]),
            CartParameterization::TwoMassesUndamped => {
                DVector::from_vec(vec![self.params.m1, self.params.m2])
            }
        }
    }

    /// `(m1, m2, c)` with `c` converted from g/s to SI.
    fn physical<T: DualNum<Primitive = f64> + Copy>(&self, theta: &[T]) -> (T, T, T) {
        match self.parameterization {
            CartParameterization::MassDamping => (theta[0], T::from(self.params.m2), theta[1] * 1e-3),
            CartParameterization::TwoMassesUndamped => (theta[0], theta[1], T::from(0.0)),
        }
    }

    fn vector_field<T: DualNum<Primitive = f64> + Copy>(&self, x: &[T], u: T, theta: &[T]) -> Vec<T> {
        let p = &self.params;
        let (m1, m2, c) = self.physical(theta);
        let (r1, r2, d1, g) = (p.r1(), p.r2(), p.joint_spacing(), p.gravity);
        let (k1, k2) = p.inertia_per_mass();

        let (phi1, phi2) = (x[1], x[2]);
        let (w1, w2) = (x[4], x[5]);
        let (s1, c1) = phi1.sin_cos();
        let (s2, c2) = phi2.sin_cos();
        let (sb, cb) = (phi1 + phi2).sin_cos();
        let wb = w1 + w2;

        // mass matrix in absolute link angles (a = phi1, b = phi1 + phi2)
        let m_aa = m1 * (r1 * r1 + k1) + m2 * (d1 * d1);
        let m_ab = m2 * c2 * (d1 * r2);
        let m_bb = m2 * (r2 * r2 + k2);

        let lever_a = m1 * r1 + m2 * d1;
        let coupling = m2 * s2 * (d1 * r2);
        let rhs_a = c * (w2 - w1) + coupling * wb * wb - lever_a * (c1 * u + s1 * g);
        let rhs_b = -(c * w2) - coupling * w1 * w1 - m2 * r2 * (cb * u + sb * g);

        let det = m_aa * m_bb - m_ab * m_ab;
        let acc_a = (m_bb * rhs_a - m_ab * rhs_b) / det;
        let acc_b = (m_aa * rhs_b - m_ab * rhs_a) / det;

        vec![x[3], w1, w2, u, acc_a, acc_b - acc_a]
    }

    /// Kinetic energy of the two links.
    pub fn kinetic_energy(&self, x: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        let p = &self.params;
        let (m1, m2, _) = self.physical(theta.as_slice());
        let (k1, k2) = p.inertia_per_mass();
        let (r1, r2, d1) = (p.r1(), p.r2(), p.joint_spacing());
        let (a, b) = (x[1], x[1] + x[2]);
        let (wa, wb) = (x[4], x[4] + x[5]);
        let v1 = (x[3] + r1 * a.cos() * wa, r1 * a.sin() * wa);
        let v2 = (
            x[3] + d1 * a.cos() * wa + r2 * b.cos() * wb,
            d1 * a.sin() * wa + r2 * b.sin() * wb,
        );
        0.5 * m1 * (v1.0 * v1.0 + v1.1 * v1.1)
            + 0.5 * m1 * k1 * wa * wa
            + 0.5 * m2 * (v2.0 * v2.0 + v2.1 * v2.1)
            + 0.5 * m2 * k2 * wb * wb
    }

    /// Gravitational potential energy, zero at the pivot height.
    pub fn potential_energy(&self, x: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        let p = &self.params;
        let (m1, m2, _) = self.physical(theta.as_slice());
        let (a, b) = (x[1], x[1] + x[2]);
        -p.gravity * (m1 * p.r1() * a.cos() + m2 * (p.joint_spacing() * a.cos() + p.r2() * b.cos()))
    }
}

impl PlantModel for CartDoublePendulum {
    fn dims(&self) -> Dims {
        Dims { n: 6, m: 1, h: 2, p: 2 }
    }

    fn name(&self) -> &str {
        match self.parameterization {
            CartParameterization::MassDamping => "cart_double_pendulum",
            CartParameterization::TwoMassesUndamped => "cart_double_pendulum_two_masses",
        }
    }

    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.vector_field(x.as_slice(), u[0], theta.as_slice()))
    }

    fn output(&self, x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[1], x[1] + x[2]])
    }

    fn df_dx(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
        ad::jacobian(&Dynamics(self), x, u, theta, Arg::X)
    }

    fn df_du(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
        ad::jacobian(&Dynamics(self), x, u, theta, Arg::U)
    }

    fn df_dtheta(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
        ad::jacobian(&Dynamics(self), x, u, theta, Arg::Theta)
    }

    fn d2f_dx2(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3 {
        ad::hessian(&Dynamics(self), x, u, theta, Arg::X, Arg::X)
    }

    fn d2f_dx_dtheta(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3 {
        ad::hessian(&Dynamics(self), x, u, theta, Arg::X, Arg::Theta)
    }

    fn d2f_dtheta2(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3 {
        ad::hessian(&Dynamics(self), x, u, theta, Arg::Theta, Arg::Theta)
    }

    fn d2f_dx_du(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3 {
        ad::hessian(&Dynamics(self), x, u, theta, Arg::X, Arg::U)
    }

    fn d2f_dtheta_du(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3 {
        ad::hessian(&Dynamics(self), x, u, theta, Arg::Theta, Arg::U)
    }

    fn dg_dx(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 6, &[0., 1., 0., 0., 0., 0., 0., 1., 1., 0., 0., 0.])
    }

    fn dg_dtheta(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(2, 2)
    }

    fn d2g_dx2(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(2, 6, 6)
    }

    fn d2g_dx_dtheta(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(2, 6, 2)
    }

    fn d2g_dtheta2(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(2, 2, 2)
    }

    fn state_names(&self) -> Vec<String> {
        ["x", "phi1", "phi2", "xdot", "phi1dot", "phi2dot"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn input_names(&self) -> Vec<String> {
        vec!["u".into()]
    }

    fn parameter_names(&self) -> Vec<String> {
        match self.parameterization {
            CartParameterization::MassDamping => vec!["m1".into(), "c".into()],
            CartParameterization::TwoMassesUndamped => vec!["m1".into(), "m2".into()],
        }
    }

    fn sample_point(&self, rng: &mut dyn rand::RngCore) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let pi = std::f64::consts::PI;
        let x = DVector::from_vec(vec![
            rng.random_range(-1.0..1.0),
            rng.random_range(-pi..pi),
            rng.random_range(-pi..pi),
            rng.random_range(-2.0..2.0),
            rng.random_range(-6.0..6.0),
            rng.random_range(-6.0..6.0),
        ]);
        let u = DVector::from_element(1, rng.random_range(-5.0..5.0));
        let nominal = self.nominal_theta();
        let theta = nominal.map(|v| v * rng.random_range(0.5..1.5));
        (x, u, theta)
    }
}
