use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::csvio;
use crate::error::{Error, Result};
use crate::model::{MeasurementNoise, PlantModel};
use crate::numkit::{DenseTrajectory, IntegratorConfig};
use crate::sensitivity::simulate;

/// Named random sub-streams derived from one seed.
pub mod streams {
    pub const NOISE: u64 = 1;
    pub const THETA0: u64 = 2;
}

/// Generator for sub-stream `stream`, work item `index` of `seed`.
pub fn substream(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 32) | (index & 0xffff_ffff));
    rng
}

/// Noisy output samples `y~(t_i)` with their noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub times: Vec<f64>,
    pub values: Vec<DVector<f64>>,
    pub sigma: MeasurementNoise,
}

impl MeasurementSet {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>, sigma: MeasurementNoise) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "measurement values",
                expected: times.len(),
                got: values.len(),
            });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("measurement times must be finite and strictly increasing".into()));
        }
        for v in &values {
            if v.len() != sigma.dim() {
                return Err(Error::DimensionMismatch {
                    what: "measurement dimension",
                    expected: sigma.dim(),
                    got: v.len(),
                });
            }
            if v.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidConfig("measurement values must be finite".into()));
            }
        }
        Ok(Self { times, values, sigma })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Fails unless every sample time lies in `[t0, tf]`.
    pub fn check_span(&self, t0: f64, tf: f64) -> Result<()> {
        match self.times.iter().find(|&&t| t < t0 || t > tf) {
            Some(&t) => Err(Error::OutOfDomain { t, t0, tf }),
            None => Ok(()),
        }
    }

    /// CSV with header `t,y1,...,yh`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.sigma.dim()).map(|i| format!("y{i}")));
        let rows = self.times.iter().zip(&self.values).map(|(t, v)| {
            let mut row = vec![*t];
            row.extend(v.iter());
            row
        });
        csvio::write_table(out, &header, rows)
    }

    pub fn read_csv<R: Read>(input: R, sigma: MeasurementNoise) -> Result<Self> {
        let (header, rows) = csvio::read_table(input)?;
        let h = sigma.dim();
        let expected: Vec<String> = std::iter::once("t".to_string()).chain((1..=h).map(|i| format!("y{i}"))).collect();
        if header != expected {
            return Err(Error::Parse(format!("expected header {}, got {}", expected.join(","), header.join(","))));
        }
        let times = rows.iter().map(|r| r[0]).collect();
        let values = rows.iter().map(|r| DVector::from_column_slice(&r[1..])).collect();
        Self::new(times, values, sigma)
    }
}

/// Sample times `t0 + k / rate` for `k = 1, 2, ...` up to `tf`.
pub fn sample_times(t0: f64, tf: f64, rate: f64) -> Result<Vec<f64>> {
    if !(rate > 0.0 && rate.is_finite()) || tf <= t0 {
        return Err(Error::InvalidConfig(format!("sampling rate {rate} on [{t0}, {tf}]")));
    }
    let n = ((tf - t0) * rate + 1e-9).floor() as usize;
    Ok((1..=n).map(|k| t0 + k as f64 / rate).collect())
}

/// Simulated outputs plus i.i.d. `N(0, Sigma)` noise, deterministic in `seed`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_measurements(
    model: &dyn PlantModel,
    u: &DenseTrajectory,
    x0: &DVector<f64>,
    theta_true: &DVector<f64>,
    rate: f64,
    sigma: &MeasurementNoise,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<MeasurementSet> {
    synthesize_with_rng(model, u, x0, theta_true, rate, sigma, &mut substream(seed, streams::NOISE, 0), cfg)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn synthesize_with_rng(
    model: &dyn PlantModel,
    u: &DenseTrajectory,
    x0: &DVector<f64>,
    theta_true: &DVector<f64>,
    rate: f64,
    sigma: &MeasurementNoise,
    rng: &mut ChaCha8Rng,
    cfg: &IntegratorConfig,
) -> Result<MeasurementSet> {
    let d = model.dims();
    if sigma.dim() != d.h {
        return Err(Error::DimensionMismatch {
            what: "noise covariance",
            expected: d.h,
            got: sigma.dim(),
        });
    }
    let x = simulate(model, x0, u, theta_true, cfg)?;
    let times = sample_times(u.t0(), u.tf(), rate)?;
    let values = times
        .iter()
        .map(|&t| {
            let w = DVector::from_fn(d.h, |_, _| StandardNormal.sample(rng));
            model.output(&x.at(t), &u.at(t), theta_true) + sigma.sqrt() * w
        })
        .collect();
    MeasurementSet::new(times, values, sigma.clone())
}

/// Sample covariance (unbiased) and mean of a set of vectors.
pub fn sample_moments(samples: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let k = samples.len();
    let p = samples.first().map_or(0, |s| s.len());
    let mut mean = DVector::zeros(p);
    for s in samples {
        mean += s;
    }
    if k > 0 {
        mean /= k as f64;
    }
    let mut cov = DMatrix::zeros(p, p);
    for s in samples {
        let d = s - &mean;
        cov += &d * d.transpose();
    }
    if k > 1 {
        cov /= (k - 1) as f64;
    }
    (mean, cov)
}
