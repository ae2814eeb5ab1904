//! Forward-mode automatic differentiation of `(x, u, theta) -> vector`
//! functions written once, generically over the scalar type.

use nalgebra::{DMatrix, DVector};
use num_dual::{Dual64, DualNum, HyperDual64};

use crate::numkit::Tensor3;

/// A vector function of state, input and parameters that can be evaluated
/// on dual numbers.
pub trait DualFn {
    fn out_dim(&self) -> usize;

    fn eval<T: DualNum<Primitive = f64> + Copy>(&self, x: &[T], u: &[T], theta: &[T]) -> Vec<T>;
}

/// Argument group a derivative is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arg {
    X,
    U,
    Theta,
}

struct Point<'a> {
    x: &'a DVector<f64>,
    u: &'a DVector<f64>,
    theta: &'a DVector<f64>,
}

impl Point<'_> {
    fn len(&self, arg: Arg) -> usize {
        match arg {
            Arg::X => self.x.len(),
            Arg::U => self.u.len(),
            Arg::Theta => self.theta.len(),
        }
    }
}

fn lift<T: DualNum<Primitive = f64> + Copy>(v: &DVector<f64>) -> Vec<T> {
    v.iter().map(|&a| T::from(a)).collect()
}

/// Plain evaluation.
pub fn value<F: DualFn>(f: &F, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(f.eval::<f64>(x.as_slice(), u.as_slice(), theta.as_slice()))
}

/// Jacobian of `f` with respect to one argument group.
pub fn jacobian<F: DualFn>(
    f: &F,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
    arg: Arg,
) -> DMatrix<f64> {
    let pt = Point { x, u, theta };
    let cols = pt.len(arg);
    let mut jac = DMatrix::zeros(f.out_dim(), cols);
    let (mut xs, mut us, mut ts) = (lift::<Dual64>(x), lift::<Dual64>(u), lift::<Dual64>(theta));
    for j in 0..cols {
        seed_dual(&mut xs, &mut us, &mut ts, arg, j, 1.0);
        let out = f.eval(&xs, &us, &ts);
        for (i, o) in out.iter().enumerate() {
            jac[(i, j)] = o.eps;
        }
        seed_dual(&mut xs, &mut us, &mut ts, arg, j, 0.0);
    }
    jac
}

fn seed_dual(xs: &mut [Dual64], us: &mut [Dual64], ts: &mut [Dual64], arg: Arg, j: usize, v: f64) {
    match arg {
        Arg::X => xs[j].eps = v,
        Arg::U => us[j].eps = v,
        Arg::Theta => ts[j].eps = v,
    }
}

/// Second derivatives: entry `[i, j, k] = d^2 f_i / (d a_j d b_k)`.
pub fn hessian<F: DualFn>(
    f: &F,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
    a: Arg,
    b: Arg,
) -> Tensor3 {
    let pt = Point { x, u, theta };
    let (na, nb) = (pt.len(a), pt.len(b));
    let mut out = Tensor3::zeros(f.out_dim(), na, nb);
    let base = (lift::<HyperDual64>(x), lift::<HyperDual64>(u), lift::<HyperDual64>(theta));
    for j in 0..na {
        let k_start = if a == b { j } else { 0 };
        for k in k_start..nb {
            let (mut xs, mut us, mut ts) = base.clone();
            seed_hyper(&mut xs, &mut us, &mut ts, a, j, true);
            seed_hyper(&mut xs, &mut us, &mut ts, b, k, false);
            let vals = f.eval(&xs, &us, &ts);
            for (i, o) in vals.iter().enumerate() {
                out.set(i, j, k, o.eps1eps2);
                if a == b {
                    out.set(i, k, j, o.eps1eps2);
                }
            }
        }
    }
    out
}

fn seed_hyper(
    xs: &mut [HyperDual64],
    us: &mut [HyperDual64],
    ts: &mut [HyperDual64],
    arg: Arg,
    j: usize,
    first: bool,
) {
    let slot = match arg {
        Arg::X => &mut xs[j],
        Arg::U => &mut us[j],
        Arg::Theta => &mut ts[j],
    };
    if first {
        slot.eps1 = 1.0;
    } else {
        slot.eps2 = 1.0;
    }
}
