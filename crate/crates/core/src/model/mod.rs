//! Plant models `dx/dt = f(x, u, theta)`, `y = g(x, u, theta)` together with
//! every partial derivative the estimator and the trajectory optimizer use.

pub mod ad;
mod cart;
mod linear;
mod noise;
mod validate;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub use cart::{CartDoublePendulum, CartDoublePendulumParams, CartParameterization};
pub use linear::ScalarLinear;
pub use noise::MeasurementNoise;
pub use validate::{derivative_errors, validate_derivatives, DerivativeError, ValidationReport};

use crate::error::{Error, Result};
use crate::numkit::Tensor3;

/// State, input, output and parameter dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub h: usize,
    pub p: usize,
}

impl Dims {
    /// Length of the extended state `(x, vec(psi))`.
    pub fn extended(&self) -> usize {
        self.n + self.n * self.p
    }
}

/// A nonlinear plant with analytic derivatives.
///
/// Tensor layouts follow [`Tensor3`]: `d2f_dx_dtheta()[i, j, k]` is
/// `d^2 f_i / (d x_j d theta_k)`, and so on. The output map is assumed not
/// to depend on `u` through any derivative used here.
pub trait PlantModel: Send + Sync {
    fn dims(&self) -> Dims;

    fn name(&self) -> &str;

    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64>;
    fn output(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64>;

    fn df_dx(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64>;
    fn df_du(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64>;
    fn df_dtheta(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64>;

    fn d2f_dx2(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3;
    fn d2f_dx_dtheta(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3;
    fn d2f_dtheta2(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3;
    fn d2f_dx_du(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3;
    fn d2f_dtheta_du(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3;

    fn dg_dx(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64>;
    fn dg_dtheta(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64>;
    fn d2g_dx2(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3;
    fn d2g_dx_dtheta(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3;
    fn d2g_dtheta2(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Tensor3;

    fn state_names(&self) -> Vec<String> {
        (1..=self.dims().n).map(|i| format!("x{i}")).collect()
    }

    fn input_names(&self) -> Vec<String> {
        (1..=self.dims().m).map(|i| format!("u{i}")).collect()
    }

    fn parameter_names(&self) -> Vec<String> {
        (1..=self.dims().p).map(|i| format!("theta{i}")).collect()
    }

    /// Random point in the model's valid domain, for derivative checks.
    fn sample_point(&self, rng: &mut dyn rand::RngCore) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let d = self.dims();
        let mut draw = |k: usize| DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        (draw(d.n), draw(d.m), draw(d.p))
    }
}

fn check_dims(model: &dyn PlantModel, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Result<()> {
    let d = model.dims();
    for (what, expected, got) in [("state", d.n, x.len()), ("input", d.m, u.len()), ("parameters", d.p, theta.len())] {
        if expected != got {
            return Err(Error::DimensionMismatch { what, expected, got });
        }
    }
    Ok(())
}

/// Checked evaluation of the vector field.
pub fn eval_dynamics(
    model: &dyn PlantModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dims(model, x, u, theta)?;
    let xd = model.dynamics(x, u, theta);
    if xd.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult(format!("{} dynamics", model.name())));
    }
    Ok(xd)
}

/// Checked evaluation of the output map.
pub fn eval_output(
    model: &dyn PlantModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dims(model, x, u, theta)?;
    let y = model.output(x, u, theta);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult(format!("{} output", model.name())));
    }
    Ok(y)
}
