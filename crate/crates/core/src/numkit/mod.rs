//! Numerical building blocks: adaptive ODE integration with dense output,
//! rank-3 tensors, and finite-difference oracles.

mod dense;
mod fd;
mod ode;
mod tensor;

pub use dense::{uniform_grid, DenseTrajectory, Interp};
pub use fd::{fd_jacobian, fd_matrix_jacobian};
pub use ode::{integrate, integrate_with_breakpoints, step_sizes, IntegratorConfig};
pub use tensor::Tensor3;

/// Relative error `|a - b|_max / max(|b|_max, 1)`.
pub fn scaled_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(1.0);
    diff / scale
}

/// Sorted union of two increasing time grids, merging points closer than `eps`.
pub fn merge_times(a: &[f64], b: &[f64], eps: f64) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        match out.last() {
            Some(&last) if t - last <= eps => {}
            _ => out.push(t),
        }
    }
    out
}
