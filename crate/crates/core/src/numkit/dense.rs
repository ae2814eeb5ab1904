//! Continuous-time curves stored as knots plus an interpolation rule.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// How values between knots are reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Linear,
    /// Cubic Hermite using the stored knot derivatives.
    CubicHermite,
}

/// A vector-valued curve on `[t0, tf]`, immutable once built.
///
/// Knot times are strictly increasing and every knot value has the same
/// dimension. Evaluation at a knot returns the stored value exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrajectory {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
    derivs: Vec<DVector<f64>>,
    interp: Interp,
}

impl DenseTrajectory {
    /// Piecewise-linear curve through the given samples.
    pub fn linear(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        check_knots(&times, &values)?;
        Ok(Self {
            times,
            values,
            derivs: Vec::new(),
            interp: Interp::Linear,
        })
    }

    /// Cubic Hermite curve with explicit knot derivatives.
    pub fn hermite(
        times: Vec<f64>,
        values: Vec<DVector<f64>>,
        derivs: Vec<DVector<f64>>,
    ) -> Result<Self> {
        check_knots(&times, &values)?;
        if derivs.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "hermite derivatives",
                expected: values.len(),
                got: derivs.len(),
            });
        }
        let dim = values[0].len();
        if let Some(d) = derivs.iter().find(|d| d.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "hermite derivative dimension",
                expected: dim,
                got: d.len(),
            });
        }
        Ok(Self {
            times,
            values,
            derivs,
            interp: Interp::CubicHermite,
        })
    }

    /// Cubic Hermite curve whose slopes are estimated from neighbouring
    /// samples (three-point formula on the non-uniform grid, one-sided at
    /// the ends).
    pub fn hermite_from_samples(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        check_knots(&times, &values)?;
        let k = times.len();
        let mut derivs = Vec::with_capacity(k);
        if k == 1 {
            derivs.push(DVector::zeros(values[0].len()));
        } else {
            for i in 0..k {
                let d = if i == 0 {
                    three_point_edge(&times, &values, 0, 1, 2)
                } else if i == k - 1 {
                    three_point_edge(&times, &values, k - 1, k - 2, k.saturating_sub(3))
                } else {
                    let (h0, h1) = (times[i] - times[i - 1], times[i + 1] - times[i]);
                    let s0 = (&values[i] - &values[i - 1]) / h0;
                    let s1 = (&values[i + 1] - &values[i]) / h1;
                    (s0 * h1 + s1 * h0) / (h0 + h1)
                };
                derivs.push(d);
            }
        }
        Self::hermite(times, values, derivs)
    }

    /// Constant curve on `[t0, tf]`.
    pub fn constant(t0: f64, tf: f64, value: DVector<f64>) -> Result<Self> {
        Self::linear(vec![t0, tf], vec![value.clone(), value])
    }

    /// Piecewise-linear samples of `f` on the uniform grid over `[t0, tf]`
    /// whose spacing is closest to `dt`.
    pub fn sample_uniform<F>(t0: f64, tf: f64, dt: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> DVector<f64>,
    {
        if !(dt > 0.0 && tf > t0) {
            return Err(Error::InvalidConfig(format!("bad grid [{t0}, {tf}] step {dt}")));
        }
        let times = uniform_grid(t0, tf, dt);
        let values = times.iter().map(|&t| f(t)).collect();
        Self::linear(times, values)
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn tf(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    /// Knot derivatives (empty for linear curves).
    pub fn derivs(&self) -> &[DVector<f64>] {
        &self.derivs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> &DVector<f64> {
        &self.values[0]
    }

    pub fn last(&self) -> &DVector<f64> {
        self.values.last().expect("non-empty")
    }

    /// Evaluate at `t`, failing outside `[t0, tf]`.
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        if !(t >= self.t0() && t <= self.tf()) {
            return Err(Error::OutOfDomain {
                t,
                t0: self.t0(),
                tf: self.tf(),
            });
        }
        Ok(self.at(t))
    }

    /// Evaluate at `t`, clamping to the domain.
    pub fn at(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.at_into(t, &mut out);
        out
    }

    /// Allocation-free evaluation into `out` (clamped to the domain).
    pub fn at_into(&self, t: f64, out: &mut DVector<f64>) {
        let k = self.segment(t);
        if k + 1 >= self.times.len() {
            out.copy_from(&self.values[self.times.len() - 1]);
            return;
        }
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let t = t.clamp(ta, tb);
        if t == ta {
            out.copy_from(&self.values[k]);
            return;
        }
        if t == tb {
            out.copy_from(&self.values[k + 1]);
            return;
        }
        let h = tb - ta;
        let s = (t - ta) / h;
        let (ya, yb) = (&self.values[k], &self.values[k + 1]);
        match self.interp {
            Interp::Linear => {
                for i in 0..out.len() {
                    out[i] = ya[i] + s * (yb[i] - ya[i]);
                }
            }
            Interp::CubicHermite => {
                let (da, db) = (&self.derivs[k], &self.derivs[k + 1]);
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                for i in 0..out.len() {
                    out[i] = h00 * ya[i] + h10 * h * da[i] + h01 * yb[i] + h11 * h * db[i];
                }
            }
        }
    }

    /// Index `k` of the segment `[t_k, t_{k+1}]` containing `t`.
    fn segment(&self, t: f64) -> usize {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return 0;
        }
        if t >= self.times[n - 1] {
            return n - 2;
        }
        self.times.partition_point(|&tk| tk <= t) - 1
    }

    /// The sub-curve of components `start..start + len`, same knots and rule.
    pub fn components(&self, start: usize, len: usize) -> Self {
        let pick = |v: &Vec<DVector<f64>>| v.iter().map(|x| x.rows(start, len).into_owned()).collect();
        Self {
            times: self.times.clone(),
            values: pick(&self.values),
            derivs: pick(&self.derivs),
            interp: self.interp,
        }
    }

    /// Samples the curve at the given times into a new piecewise-linear curve.
    pub fn resample_linear(&self, times: &[f64]) -> Result<Self> {
        let values = times.iter().map(|&t| self.at(t)).collect();
        Self::linear(times.to_vec(), values)
    }
}

/// Uniform grid on `[t0, tf]` including both ends, spacing close to `dt`.
pub fn uniform_grid(t0: f64, tf: f64, dt: f64) -> Vec<f64> {
    let steps = ((tf - t0) / dt).round().max(1.0) as usize;
    (0..=steps)
        .map(|k| if k == steps { tf } else { t0 + (tf - t0) * k as f64 / steps as f64 })
        .collect()
}

fn three_point_edge(
    times: &[f64],
    values: &[DVector<f64>],
    i: usize,
    j: usize,
    k: usize,
) -> DVector<f64> {
    if times.len() < 3 {
        return (&values[j] - &values[i]) / (times[j] - times[i]);
    }
    // derivative at times[i] of the parabola through samples i, j, k
    let (ti, tj, tk) = (times[i], times[j], times[k]);
    let wi = (2.0 * ti - tj - tk) / ((ti - tj) * (ti - tk));
    let wj = (ti - tk) / ((tj - ti) * (tj - tk));
    let wk = (ti - tj) / ((tk - ti) * (tk - tj));
    &values[i] * wi + &values[j] * wj + &values[k] * wk
}

fn check_knots(times: &[f64], values: &[DVector<f64>]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidConfig("trajectory needs at least one knot".into()));
    }
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            what: "knot values",
            expected: times.len(),
            got: values.len(),
        });
    }
    if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig(format!(
            "knot times must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    let dim = values[0].len();
    if let Some(v) = values.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            what: "knot dimension",
            expected: dim,
            got: v.len(),
        });
    }
    Ok(())
}
