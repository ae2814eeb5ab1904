use nalgebra::{DMatrix, DVector};

use super::{Dims, PlantModel};
use crate::numkit::Tensor3;

/// Scalar benchmark `dx/dt = theta x + u`, `y = x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarLinear;

impl PlantModel for ScalarLinear {
    fn dims(&self) -> Dims {
        Dims { n: 1, m: 1, h: 1, p: 1 }
    }

    fn name(&self) -> &str {
        "scalar_linear"
    }

    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, theta[0] * x[0] + u[0])
    }

    fn output(&self, x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }

    fn df_dx(&self, _x: &DVector<f64>, _u: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, theta[0])
    }

    fn df_du(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }

    fn df_dtheta(&self, x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x[0])
    }

    fn d2f_dx2(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(1, 1, 1)
    }

    fn d2f_dx_dtheta(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::from_vec(1, 1, 1, vec![1.0])
    }

    fn d2f_dtheta2(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(1, 1, 1)
    }

    fn d2f_dx_du(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(1, 1, 1)
    }

    fn d2f_dtheta_du(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(1, 1, 1)
    }

    fn dg_dx(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn dg_dtheta(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }

    fn d2g_dx2(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(1, 1, 1)
    }

    fn d2g_dx_dtheta(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(1, 1, 1)
    }

    fn d2g_dtheta2(&self, _x: &DVector<f64>, _u: &DVector<f64>, _theta: &DVector<f64>) -> Tensor3 {
        Tensor3::zeros(1, 1, 1)
    }

    fn parameter_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }
}
