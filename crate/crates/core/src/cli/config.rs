//! Experiment configuration (TOML). Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::EstimatorConfig;
use crate::model::{CartDoublePendulum, CartDoublePendulumParams, CartParameterization, MeasurementNoise, PlantModel, ScalarLinear};
use crate::numkit::IntegratorConfig;
use crate::trajopt::{OptimizerConfig, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    CartDoublePendulum,
    ScalarLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub parameterization: CartParameterization,
    pub params: CartDoublePendulumParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Parameters generating synthetic data; also the design point.
    pub theta_true: Vec<f64>,
    /// Estimator starting point.
    pub theta0: Vec<f64>,
    /// Initial state; empty means at rest.
    pub x0: Vec<f64>,
    /// Seconds.
    pub horizon: f64,
    /// Hz.
    pub sampling_rate: f64,
    /// Diagonal of the output noise covariance.
    pub sigma_diag: Vec<f64>,
    /// Control grid spacing, seconds.
    pub control_dt: f64,
    /// CSV `t,u1..` replacing the built-in initial control.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_file: Option<PathBuf>,
    /// CSV `t,y1..` of measurements for `estimate`; synthesized when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurements: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            theta_true: vec![0.085, 0.5],
            theta0: vec![0.085, 0.5],
            x0: Vec::new(),
            horizon: 5.0,
            sampling_rate: 30.0,
            sigma_diag: vec![1.12e-4, 4.79e-4],
            control_dt: 0.01,
            control_file: None,
            measurements: None,
        }
    }
}

/// `amplitude * sin(2 pi frequency t)` on every input channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialControl {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Default for InitialControl {
    fn default() -> Self {
        Self { amplitude: 0.1, frequency: 0.5 }
    }
}

/// Diagonal weights; `q_n`, `r_n`, `q_k`, `r_k` scale the built-in shapes
/// (identity, identity, state-only identity, identity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub q_p: f64,
    /// Empty means zero.
    pub q_tau_diag: Vec<f64>,
    /// Empty means `0.1` per input.
    pub r_tau_diag: Vec<f64>,
    pub q_n_scale: f64,
    pub r_n_scale: f64,
    pub q_k_scale: f64,
    pub r_k_scale: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            q_p: 10.0,
            q_tau_diag: Vec::new(),
            r_tau_diag: Vec::new(),
            q_n_scale: 1.0,
            r_n_scale: 1.0,
            q_k_scale: 1.0,
            r_k_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub trials: usize,
    /// Initial guesses are `theta_true * (1 + spread * U(-1, 1))`.
    pub theta0_spread: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self { trials: 100, theta0_spread: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub model: ModelConfig,
    pub experiment: ExperimentConfig,
    pub initial_control: InitialControl,
    pub weights: WeightsConfig,
    pub integrator: IntegratorConfig,
    pub optimizer: OptimizerConfig,
    pub estimator: EstimatorConfig,
    pub montecarlo: MonteCarloConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            model: ModelConfig::default(),
            experiment: ExperimentConfig::default(),
            initial_control: InitialControl::default(),
            weights: WeightsConfig::default(),
            integrator: IntegratorConfig::default(),
            optimizer: OptimizerConfig::default(),
            estimator: EstimatorConfig::default(),
            montecarlo: MonteCarloConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative data paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.experiment.control_file, &mut cfg.experiment.measurements].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// The effective configuration, defaults filled in.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build_model(&self) -> Result<Box<dyn PlantModel>> {
        Ok(match self.model.kind {
            ModelKind::CartDoublePendulum => {
                self.model.params.validate()?;
                Box::new(CartDoublePendulum::new(self.model.params, self.model.parameterization))
            }
            ModelKind::ScalarLinear => Box::new(ScalarLinear),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.build_model()?;
        let d = model.dims();
        let e = &self.experiment;
        let sized = |name: &str, v: &[f64], n: usize, allow_empty: bool| {
            if v.len() == n || (allow_empty && v.is_empty()) {
                Ok(())
            } else {
                Err(invalid(format!("{name} needs {n} entries, got {}", v.len())))
            }
        };
        sized("experiment.theta_true", &e.theta_true, d.p, false)?;
        sized("experiment.theta0", &e.theta0, d.p, false)?;
        sized("experiment.x0", &e.x0, d.n, true)?;
        sized("experiment.sigma_diag", &e.sigma_diag, d.h, false)?;
        sized("weights.q_tau_diag", &self.weights.q_tau_diag, d.n, true)?;
        sized("weights.r_tau_diag", &self.weights.r_tau_diag, d.m, true)?;
        if e.theta_true.iter().chain(&e.theta0).chain(&e.x0).any(|v| !v.is_finite()) {
            return Err(invalid("experiment values must be finite"));
        }
        if !(e.horizon > 0.0 && e.horizon.is_finite()) {
            return Err(invalid(format!("experiment.horizon must be positive, got {}", e.horizon)));
        }
        if !(e.sampling_rate > 0.0 && e.sampling_rate.is_finite()) {
            return Err(invalid(format!("experiment.sampling_rate must be positive, got {}", e.sampling_rate)));
        }
        if !(e.control_dt > 0.0 && e.control_dt <= e.horizon) {
            return Err(invalid(format!("experiment.control_dt must lie in (0, horizon], got {}", e.control_dt)));
        }
        if !self.initial_control.amplitude.is_finite() || !(self.initial_control.frequency >= 0.0) {
            return Err(invalid("initial_control needs a finite amplitude and a frequency >= 0"));
        }
        self.sigma()?;
        self.weights(d)?.validate(d)?;
        self.integrator.validate()?;
        self.optimizer.validate()?;
        self.estimator.validate()?;
        if self.montecarlo.trials < 2 || !(self.montecarlo.theta0_spread >= 0.0) {
            return Err(invalid("montecarlo needs trials >= 2 and theta0_spread >= 0"));
        }
        Ok(())
    }

    pub fn sigma(&self) -> Result<MeasurementNoise> {
        let s = MeasurementNoise::diagonal(&self.experiment.sigma_diag)?;
        s.inverse()?;
        Ok(s)
    }

    pub fn theta_true(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.experiment.theta_true)
    }

    pub fn theta0(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.experiment.theta0)
    }

    pub fn x0(&self, n: usize) -> DVector<f64> {
        if self.experiment.x0.is_empty() {
            DVector::zeros(n)
        } else {
            DVector::from_column_slice(&self.experiment.x0)
        }
    }

    pub fn weights(&self, d: crate::model::Dims) -> Result<Weights> {
        let wc = &self.weights;
        let mut w = Weights::defaults(d);
        w.q_p = wc.q_p;
        if !wc.q_tau_diag.is_empty() {
            w.q_tau = DMatrix::from_diagonal(&DVector::from_column_slice(&wc.q_tau_diag));
        }
        if !wc.r_tau_diag.is_empty() {
            w.r_tau = DMatrix::from_diagonal(&DVector::from_column_slice(&wc.r_tau_diag));
        }
        w.q_n *= wc.q_n_scale;
        w.r_n *= wc.r_n_scale;
        w.q_k *= wc.q_k_scale;
        w.r_k *= wc.r_k_scale;
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_and_unknown_keys_fail() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), cfg);
        assert!(matches!(Config::from_toml("bogus = 1"), Err(Error::InvalidConfig(_))));
        assert!(Config::from_toml("[weights]\nq_tau = 1.0").is_err());
        assert!(Config::from_toml("[experiment]\ntheta_true = [1.0]").is_err());
        assert!(Config::from_toml("[weights]\nr_n_scale = 0.0").is_err());
    }
}
