use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measurements::{sample_moments, streams, substream, synthesize_with_rng};
use super::{estimate, EstimationResult, EstimatorConfig, MeasurementSet};
use crate::error::{Error, Result};
use crate::model::{MeasurementNoise, PlantModel};
use crate::numkit::{DenseTrajectory, IntegratorConfig};

/// How initial guesses are drawn around the true parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Theta0Sampler {
    /// `theta_i * (1 + spread * U(-1, 1))` per component.
    UniformRelative { spread: f64 },
    Fixed { theta0: Vec<f64> },
}

impl Theta0Sampler {
    pub fn draw<R: Rng>(&self, theta_true: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        match self {
            Theta0Sampler::UniformRelative { spread } => {
                theta_true.map(|t| t * (1.0 + spread * rng.random_range(-1.0..=1.0)))
            }
            Theta0Sampler::Fixed { theta0 } => DVector::from_column_slice(theta0),
        }
    }
}

/// Whether trials get independent random streams or all share stream 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialSeeding {
    #[default]
    PerTrial,
    Shared,
}

/// Everything one Monte-Carlo study needs.
pub struct MonteCarloSetup<'a> {
    pub model: &'a dyn PlantModel,
    pub u: &'a DenseTrajectory,
    pub x0: &'a DVector<f64>,
    pub theta_true: &'a DVector<f64>,
    pub sampler: Theta0Sampler,
    pub trials: usize,
    pub rate: f64,
    /// Covariance of the injected noise.
    pub sigma: &'a MeasurementNoise,
    /// Covariance the estimator weights residuals with; `None` uses `sigma`.
    pub weighting: Option<&'a MeasurementNoise>,
    pub seed: u64,
    pub seeding: TrialSeeding,
    pub estimator: EstimatorConfig,
    pub integrator: IntegratorConfig,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub index: usize,
    pub theta0: DVector<f64>,
    pub result: std::result::Result<EstimationResult, Error>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    /// Mean and unbiased covariance of the estimates of all trials that
    /// produced one.
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub trials: Vec<TrialOutcome>,
}

impl MonteCarloReport {
    pub fn failures(&self) -> usize {
        self.trials.iter().filter(|t| t.result.is_err()).count()
    }

    pub fn converged(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| matches!(&t.result, Ok(r) if r.converged))
            .count()
    }
}

/// Repeated noise draws and estimation from random initial guesses.
///
/// Trials run in parallel; each uses its own generator derived from
/// `(seed, trial index)`, so results do not depend on scheduling.
pub fn monte_carlo(setup: &MonteCarloSetup) -> Result<MonteCarloReport> {
    if setup.trials < 2 {
        return Err(Error::InvalidConfig("a Monte-Carlo study needs at least 2 trials".into()));
    }
    setup.estimator.validate()?;
    let trials: Vec<TrialOutcome> = (0..setup.trials)
        .into_par_iter()
        .map(|index| run_trial(setup, index))
        .collect();
    let estimates: Vec<DVector<f64>> = trials
        .iter()
        .filter_map(|t| t.result.as_ref().ok().map(|r| r.theta_hat.clone()))
        .collect();
    if estimates.len() < 2 {
        return Err(Error::NonFiniteResult(format!(
            "only {} of {} Monte-Carlo trials produced an estimate",
            estimates.len(),
            setup.trials
        )));
    }
    let (mean, covariance) = sample_moments(&estimates);
    Ok(MonteCarloReport { mean, covariance, trials })
}

fn run_trial(setup: &MonteCarloSetup, index: usize) -> TrialOutcome {
    let stream_index = match setup.seeding {
        TrialSeeding::PerTrial => index as u64,
        TrialSeeding::Shared => 0,
    };
    let mut theta_rng = substream(setup.seed, streams::THETA0, stream_index);
    let mut noise_rng = substream(setup.seed, streams::NOISE, stream_index);
    let theta0 = setup.sampler.draw(setup.theta_true, &mut theta_rng);
    let result = synthesize_with_rng(
        setup.model,
        setup.u,
        setup.x0,
        setup.theta_true,
        setup.rate,
        setup.sigma,
        &mut noise_rng,
        &setup.integrator,
    )
    .and_then(|meas| {
        let meas = match setup.weighting {
            Some(w) => MeasurementSet::new(meas.times, meas.values, w.clone())?,
            None => meas,
        };
        estimate(
            setup.model,
            setup.u,
            setup.x0,
            &theta0,
            &meas,
            &setup.estimator,
            &setup.integrator,
        )
    });
    TrialOutcome { index, theta0, result }
}
