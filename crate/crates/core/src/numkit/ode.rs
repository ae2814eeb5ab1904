//! Dormand-Prince 5(4) integration with PI step control and cubic-Hermite
//! dense output.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::dense::DenseTrajectory;
use crate::error::{Error, Result};

/// Tolerances and step limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            h_min: 1e-12,
            h_max: 0.1,
            h_init: 1e-3,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.h_min > 0.0
            && self.h_min <= self.h_init
            && self.h_init <= self.h_max
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid integrator settings {self:?}")))
        }
    }

    /// Same step limits with both tolerances scaled by `factor`.
    pub fn scaled_tolerances(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const PI_BETA: f64 = 0.04;
const PI_EXPO: f64 = 0.2 - PI_BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Integrates `dx/dt = field(t, x)` from `span.0` to `span.1`.
///
/// `span.1 < span.0` integrates backward in time; the returned trajectory
/// always has increasing knot times. Knots are the accepted adaptive steps.
pub fn integrate<F>(
    field: F,
    x0: &DVector<f64>,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    integrate_with_breakpoints(field, x0, span, &[], cfg)
}

/// Like [`integrate`], but forces steps to land exactly on every breakpoint
/// strictly inside the span (kinks in the field's time dependence).
pub fn integrate_with_breakpoints<F>(
    mut field: F,
    x0: &DVector<f64>,
    span: (f64, f64),
    breakpoints: &[f64],
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    cfg.validate()?;
    let (t0, tf) = span;
    if !(t0.is_finite() && tf.is_finite()) || t0 == tf {
        return Err(Error::InvalidConfig(format!("invalid integration span [{t0}, {tf}]")));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: t0 });
    }
    let dir = if tf > t0 { 1.0 } else { -1.0 };

    let mut targets: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| (b - t0) * dir > 0.0 && (tf - b) * dir > 0.0)
        .collect();
    targets.sort_by(|a, b| (a * dir).partial_cmp(&(b * dir)).expect("finite breakpoints"));
    targets.dedup();
    targets.push(tf);

    let mut t = t0;
    let mut y = x0.clone();
    let mut k1 = field(t, &y);
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t });
    }
    let mut times = vec![t];
    let mut values = vec![y.clone()];
    let mut derivs = vec![k1.clone()];

    let mut h = cfg.h_init.min(cfg.h_max);
    let mut err_old: f64 = 1e-4;
    let mut attempts = 0usize;
    let dim = y.len();
    let mut ytmp = DVector::zeros(dim);

    for &target in &targets {
        while (target - t) * dir > 0.0 {
            attempts += 1;
            if attempts > cfg.max_steps {
                return Err(Error::MaxStepsExceeded {
                    max_steps: cfg.max_steps,
                    t,
                });
            }
            let remaining = (target - t).abs();
            let last = h >= remaining * (1.0 - 1e-12);
            let hs = if last { remaining } else { h };
            let dt = dir * hs;

            stage(&mut ytmp, &y, dt, &[(A21, &k1)]);
            let k2 = field(t + C2 * dt, &ytmp);
            stage(&mut ytmp, &y, dt, &[(A31, &k1), (A32, &k2)]);
            let k3 = field(t + C3 * dt, &ytmp);
            stage(&mut ytmp, &y, dt, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            let k4 = field(t + C4 * dt, &ytmp);
            stage(
                &mut ytmp,
                &y,
                dt,
                &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            );
            let k5 = field(t + C5 * dt, &ytmp);
            stage(
                &mut ytmp,
                &y,
                dt,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            );
            let k6 = field(t + dt, &ytmp);
            let mut y_new = DVector::zeros(dim);
            stage(
                &mut y_new,
                &y,
                dt,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let t_new = if last { target } else { t + dt };
            let k7 = field(t_new, &y_new);

            let mut acc = 0.0;
            let mut finite = true;
            for i in 0..dim {
                let e = dt
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
                let r = e / sc;
                if !r.is_finite() || !y_new[i].is_finite() || !k7[i].is_finite() {
                    finite = false;
                }
                acc += r * r;
            }
            let err = if finite {
                (acc / dim.max(1) as f64).sqrt()
            } else {
                f64::INFINITY
            };

            if err <= 1.0 {
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err.powf(-PI_EXPO) * err_old.powf(PI_BETA)).clamp(FAC_MIN, FAC_MAX)
                };
                err_old = err.max(1e-4);
                t = t_new;
                y = y_new;
                k1 = k7;
                times.push(t);
                values.push(y.clone());
                derivs.push(k1.clone());
                if !last {
                    h = (hs * fac).min(cfg.h_max);
                }
            } else {
                if last && hs < cfg.h_min {
                    // tiny closing step onto a target; nothing smaller to try
                    if !finite {
                        return Err(Error::NonFiniteState { t });
                    }
                    return Err(Error::StepUnderflow { t, h: hs });
                }
                let fac = if finite {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
                } else {
                    FAC_MIN
                };
                h = hs * fac;
                if h < cfg.h_min {
                    if !finite {
                        return Err(Error::NonFiniteState { t });
                    }
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
    }

    if dir < 0.0 {
        times.reverse();
        values.reverse();
        derivs.reverse();
    }
    DenseTrajectory::hermite(times, values, derivs)
}

fn stage(out: &mut DVector<f64>, y: &DVector<f64>, dt: f64, terms: &[(f64, &DVector<f64>)]) {
    out.copy_from(y);
    for (a, k) in terms {
        out.axpy(dt * a, k, 1.0);
    }
}

/// Accepted step sizes of an integrated trajectory.
pub fn step_sizes(traj: &DenseTrajectory) -> Vec<f64> {
    traj.times().windows(2).map(|w| w[1] - w[0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn zero_field_is_constant() {
        let cfg = IntegratorConfig::default();
        let tr = integrate(|_, x| DVector::zeros(x.len()), &scalar(1.0), (0.0, 1.0), &cfg).unwrap();
        assert_eq!(tr.eval(0.5).unwrap()[0], 1.0);
    }

    #[test]
    fn decaying_exponential() {
        let cfg = IntegratorConfig::default();
        let tr = integrate(|_, x| -x, &scalar(1.0), (0.0, 1.0), &cfg).unwrap();
        let got = tr.eval(1.0).unwrap()[0];
        assert!((got - (-1.0f64).exp()).abs() < 10.0 * cfg.rel_tol);
    }

    #[test]
    fn growing_exponential() {
        let cfg = IntegratorConfig::default();
        let theta = 2.0;
        let tr = integrate(|_, x| x * theta, &scalar(1.0), (0.0, 0.5), &cfg).unwrap();
        let got = tr.eval(0.5).unwrap()[0];
        assert!((got - 1f64.exp()).abs() < 10.0 * cfg.rel_tol * 1f64.exp());
    }

    #[test]
    fn backward_integration() {
        let cfg = IntegratorConfig::default();
        // x' = x from t=1 back to t=0 with x(1) = e
        let tr = integrate(|_, x| x.clone(), &scalar(1f64.exp()), (1.0, 0.0), &cfg).unwrap();
        assert_eq!(tr.t0(), 0.0);
        assert_eq!(tr.tf(), 1.0);
        assert!((tr.eval(0.0).unwrap()[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn lands_on_breakpoints() {
        let cfg = IntegratorConfig::default();
        let bps = [0.25, 0.5, 0.75];
        let tr = integrate_with_breakpoints(
            |t, _| scalar(if t < 0.5 { t } else { 1.0 - t }),
            &scalar(0.0),
            (0.0, 1.0),
            &bps,
            &cfg,
        )
        .unwrap();
        for b in bps {
            assert!(tr.times().contains(&b));
        }
        assert!((tr.eval(0.5).unwrap()[0] - 0.125).abs() < 1e-12);
        assert!((tr.eval(1.0).unwrap()[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn steps_vary() {
        let cfg = IntegratorConfig::default();
        let tr = integrate(
            |t, x| DVector::from_vec(vec![x[1], -(1.0 + 50.0 * t * t) * x[0]]),
            &DVector::from_vec(vec![1.0, 0.0]),
            (0.0, 2.0),
            &cfg,
        )
        .unwrap();
        let h = step_sizes(&tr);
        let (lo, hi) = h.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi > 2.0 * lo);
    }

    #[test]
    fn nonfinite_state_detected() {
        let cfg = IntegratorConfig::default();
        // finite-time blow-up at t = 1
        let r = integrate(|_, x| x.map(|v| v * v), &scalar(1.0), (0.0, 2.0), &cfg);
        assert!(matches!(
            r,
            Err(Error::NonFiniteState { .. }) | Err(Error::StepUnderflow { .. })
        ));
    }

    #[test]
    fn max_steps_exceeded() {
        let cfg = IntegratorConfig {
            max_steps: 5,
            ..Default::default()
        };
        let r = integrate(|t, _| scalar((50.0 * t).sin()), &scalar(0.0), (0.0, 10.0), &cfg);
        assert!(matches!(r, Err(Error::MaxStepsExceeded { .. })));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = IntegratorConfig {
            h_min: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
