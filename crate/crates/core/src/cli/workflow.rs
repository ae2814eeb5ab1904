//! The six workflows behind the subcommands. Each writes its artifacts
//! into an output directory and returns a serializable summary.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::config::Config;
use crate::csvio::{read_table, write_matrix, write_table};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate, monte_carlo, sample_times, synthesize_measurements, MeasurementSet, MonteCarloReport, MonteCarloSetup,
    StopReason, Theta0Sampler, TrialSeeding,
};
use crate::information::{cramer_rao, fim_continuous, fim_discrete, InfoMatrix, InfoSummary, IDENTIFIABILITY_THRESHOLD};
use crate::model::{MeasurementNoise, PlantModel};
use crate::numkit::DenseTrajectory;
use crate::trajopt::{
    optimize_with, perturb_initial, write_trace, ControlGrid, ExtendedTrajectory, IterationRecord, OptimizerStop,
    TrajectoryProblem,
};

/// A loaded configuration with everything derived from it.
pub struct Experiment {
    pub config: Config,
    pub model: Box<dyn PlantModel>,
    pub sigma: MeasurementNoise,
    pub theta: DVector<f64>,
    pub x0: DVector<f64>,
    pub grid: ControlGrid,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl Experiment {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let model = config.build_model()?;
        let d = model.dims();
        Ok(Self {
            sigma: config.sigma()?,
            theta: config.theta_true(),
            x0: config.x0(d.n),
            grid: ControlGrid::new(0.0, config.experiment.horizon, config.experiment.control_dt)?,
            model,
            config,
        })
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.model.parameter_names()
    }

    /// The control file resampled on the grid, or the configured sinusoid.
    pub fn initial_control(&self) -> Result<DenseTrajectory> {
        let m = self.model.dims().m;
        match &self.config.experiment.control_file {
            None => {
                let ic = self.config.initial_control;
                self.grid.sinusoid(m, ic.amplitude, ic.frequency)
            }
            Some(path) => {
                let (header, table) = read_table(File::open(path)?)?;
                if header.len() != m + 1 || table.len() < 2 {
                    return Err(Error::InvalidConfig(format!(
                        "{}: expected a t column, {m} input column(s) and at least two rows",
                        path.display()
                    )));
                }
                let raw = DenseTrajectory::linear(
                    table.iter().map(|r| r[0]).collect(),
                    table.iter().map(|r| DVector::from_column_slice(&r[1..])).collect(),
                )?;
                if raw.t0() > self.grid.t0() || raw.tf() < self.grid.tf() {
                    return Err(Error::InvalidConfig(format!(
                        "{} covers [{}, {}], horizon needs [{}, {}]",
                        path.display(),
                        raw.t0(),
                        raw.tf(),
                        self.grid.t0(),
                        self.grid.tf()
                    )));
                }
                self.grid.sample(|t| raw.at(t))
            }
        }
    }

    pub fn simulate(&self, u: DenseTrajectory) -> Result<ExtendedTrajectory> {
        ExtendedTrajectory::simulate(self.model.as_ref(), &self.theta, &self.x0, u, &self.config.integrator)
    }

    /// Design problem tracking `x_d`.
    pub fn problem(&self, x_d: DenseTrajectory) -> Result<TrajectoryProblem<'_>> {
        Ok(TrajectoryProblem {
            model: self.model.as_ref(),
            theta: self.theta.clone(),
            sigma: self.sigma.clone(),
            x_d,
            weights: self.config.weights(self.model.dims())?,
            grid: self.grid.clone(),
            integrator: self.config.integrator,
        })
    }

    pub fn sample_times(&self) -> Result<Vec<f64>> {
        sample_times(0.0, self.config.experiment.horizon, self.config.experiment.sampling_rate)
    }

    pub fn discrete_fim(&self, eta: &ExtendedTrajectory) -> Result<InfoMatrix> {
        fim_discrete(self.model.as_ref(), &eta.state(), &eta.u, &self.theta, &eta.psi(), &self.sample_times()?, &self.sigma)
    }

    pub fn continuous_fim(&self, eta: &ExtendedTrajectory) -> Result<InfoMatrix> {
        fim_continuous(
            self.model.as_ref(),
            &eta.state(),
            &eta.u,
            &self.theta,
            &eta.psi(),
            &self.sigma,
            &self.config.integrator,
        )
    }

    fn monte_carlo(&self, u: &DenseTrajectory) -> Result<MonteCarloReport> {
        let mc = self.config.montecarlo;
        monte_carlo(&MonteCarloSetup {
            model: self.model.as_ref(),
            u,
            x0: &self.x0,
            theta_true: &self.theta,
            sampler: Theta0Sampler::UniformRelative { spread: mc.theta0_spread },
            trials: mc.trials,
            rate: self.config.experiment.sampling_rate,
            sigma: &self.sigma,
            weighting: None,
            seed: self.config.seed,
            seeding: TrialSeeding::PerTrial,
            estimator: self.config.estimator.clone(),
            integrator: self.config.integrator,
        })
    }

    /// `t, states..., inputs...` on the control grid.
    pub fn write_trajectory(&self, eta: &ExtendedTrajectory, path: &Path) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.model.state_names());
        header.extend(self.model.input_names());
        let n = self.model.dims().n;
        let table = self.grid.times().iter().map(|&t| {
            let mut row = vec![t];
            row.extend(eta.xbar.at(t).rows(0, n).iter());
            row.extend(eta.u.at(t).iter());
            row
        });
        write_table(BufWriter::new(File::create(path)?), &header, table)
    }

    fn write_control(&self, u: &DenseTrajectory, path: &Path) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.model.input_names());
        let table = u.times().iter().zip(u.values()).map(|(t, v)| {
            let mut row = vec![*t];
            row.extend(v.iter());
            row
        });
        write_table(BufWriter::new(File::create(path)?), &header, table)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub trajectory_csv: PathBuf,
    pub samples: usize,
}

pub fn run_simulate(exp: &Experiment, out: &Path) -> Result<SimulateSummary> {
    let eta = exp.simulate(exp.initial_control()?)?;
    let path = out.join("trajectory.csv");
    exp.write_trajectory(&eta, &path)?;
    Ok(SimulateSummary { trajectory_csv: path, samples: exp.grid.times().len() })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrbSummary {
    pub discrete: InfoSummary,
    pub continuous: InfoSummary,
    pub crb: Vec<Vec<f64>>,
}

/// Writes both information matrices before inverting, so a singular
/// experiment still leaves its diagnostics behind.
pub fn run_crb(exp: &Experiment, out: &Path) -> Result<CrbSummary> {
    let eta = exp.simulate(exp.initial_control()?)?;
    let names = exp.parameter_names();
    let discrete = exp.discrete_fim(&eta)?;
    let continuous = exp.continuous_fim(&eta)?;
    write_matrix(create(out, "fim.csv")?, &names, &discrete.matrix)?;
    write_matrix(create(out, "fim_continuous.csv")?, &names, &continuous.matrix)?;
    let partial = (discrete.summary(&names, IDENTIFIABILITY_THRESHOLD), continuous.summary(&names, IDENTIFIABILITY_THRESHOLD));
    write_json(out, "fim_summary.json", &partial)?;
    let crb = cramer_rao(&discrete)?;
    write_matrix(create(out, "crb.csv")?, &names, &crb)?;
    let summary = CrbSummary { discrete: partial.0, continuous: partial.1, crb: rows(&crb) };
    write_json(out, "crb_summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeSummary {
    pub stop: OptimizerStop,
    pub iterations: usize,
    /// Whether the initial trajectory had to be perturbed to carry information.
    pub perturbed_initial: bool,
    pub j_initial: f64,
    pub j_final: f64,
    pub lambda_min_initial: f64,
    pub lambda_min_final: f64,
    pub lambda_max_initial: f64,
    pub lambda_max_final: f64,
    #[serde(skip)]
    pub initial: Option<ExtendedTrajectory>,
    #[serde(skip)]
    pub optimized: Option<ExtendedTrajectory>,
    #[serde(skip)]
    pub trace: Vec<IterationRecord>,
}

/// Optimizes from the configured initial control. `progress` sees
/// every trace row.
pub fn run_optimize(exp: &Experiment, out: &Path, progress: impl FnMut(&IterationRecord)) -> Result<OptimizeSummary> {
    let mut eta0 = exp.simulate(exp.initial_control()?)?;
    let problem = exp.problem(eta0.state())?;
    let mut perturbed_initial = false;
    if let Err(Error::SingularInformation { .. }) = problem.evaluate(&eta0) {
        let ic = exp.config.initial_control;
        eta0 = perturb_initial(&problem, &eta0, ic.amplitude, ic.frequency)?;
        perturbed_initial = true;
    }
    let res = optimize_with(&problem, eta0.clone(), &exp.config.optimizer, progress)?;
    write_trace(&res.trace, create(out, "trace.csv")?)?;
    exp.write_control(&res.trajectory.u, &out.join("optimized_control.csv"))?;
    exp.write_trajectory(&res.trajectory, &out.join("optimized_trajectory.csv"))?;
    let first = res.trace[0];
    let last = *res.trace.last().expect("trace has a row per iterate");
    let summary = OptimizeSummary {
        stop: res.stop,
        iterations: res.iterations(),
        perturbed_initial,
        j_initial: first.j,
        j_final: last.j,
        lambda_min_initial: first.lambda_min,
        lambda_min_final: last.lambda_min,
        lambda_max_initial: first.lambda_max,
        lambda_max_final: last.lambda_max,
        initial: Some(eta0),
        optimized: Some(res.trajectory),
        trace: res.trace,
    };
    write_json(out, "optimize_summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub parameters: Vec<String>,
    pub theta0: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub final_cost: f64,
    pub synthesized_measurements: bool,
}

/// Batch least squares on the measurement file, or on measurements
/// synthesized from `theta_true` when none is configured.
pub fn run_estimate(exp: &Experiment, out: &Path) -> Result<EstimateSummary> {
    let u = exp.initial_control()?;
    let cfg = &exp.config;
    let (meas, synthesized) = match &cfg.experiment.measurements {
        Some(path) => (MeasurementSet::read_csv(File::open(path)?, exp.sigma.clone())?, false),
        None => {
            let m = synthesize_measurements(
                exp.model.as_ref(),
                &u,
                &exp.x0,
                &exp.theta,
                cfg.experiment.sampling_rate,
                &exp.sigma,
                cfg.seed,
                &cfg.integrator,
            )?;
            m.write_csv(create(out, "measurements.csv")?)?;
            (m, true)
        }
    };
    meas.check_span(u.t0(), u.tf())?;
    let theta0 = cfg.theta0();
    let res = estimate(exp.model.as_ref(), &u, &exp.x0, &theta0, &meas, &cfg.estimator, &cfg.integrator)?;
    write_table(
        create(out, "estimate_trace.csv")?,
        &["iter".into(), "beta".into(), "grad_norm".into()],
        res.cost_trace
            .iter()
            .zip(&res.grad_norm_trace)
            .enumerate()
            .map(|(i, (b, g))| vec![i as f64, *b, *g]),
    )?;
    let summary = EstimateSummary {
        parameters: exp.parameter_names(),
        theta0: theta0.iter().copied().collect(),
        theta_hat: res.theta_hat.iter().copied().collect(),
        iterations: res.iterations(),
        converged: res.converged,
        stop_reason: res.stop_reason,
        final_cost: res.final_cost(),
        synthesized_measurements: synthesized,
    };
    write_json(out, "estimate.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub parameters: Vec<String>,
    pub trials: usize,
    pub failures: usize,
    pub converged: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub crb: Vec<Vec<f64>>,
    #[serde(skip)]
    pub covariance_matrix: DMatrix<f64>,
    #[serde(skip)]
    pub crb_matrix: DMatrix<f64>,
}

fn monte_carlo_block(exp: &Experiment, eta: &ExtendedTrajectory, out: &Path, csv_name: &str) -> Result<MonteCarloSummary> {
    let rep = exp.monte_carlo(&eta.u)?;
    let names = exp.parameter_names();
    let mut header = vec!["trial".to_string()];
    header.extend(names.iter().map(|n| format!("{n}_0")));
    header.extend(names.iter().map(|n| format!("{n}_hat")));
    header.extend(["converged".to_string(), "iterations".to_string()]);
    let p = names.len();
    let table = rep.trials.iter().map(|t| {
        let mut row = vec![t.index as f64];
        row.extend(t.theta0.iter());
        match &t.result {
            Ok(r) => {
                row.extend(r.theta_hat.iter());
                row.push(if r.converged { 1.0 } else { 0.0 });
                row.push(r.iterations() as f64);
            }
            Err(_) => {
                row.extend(std::iter::repeat_n(f64::NAN, p));
                row.extend([0.0, 0.0]);
            }
        }
        row
    });
    write_table(create(out, csv_name)?, &header, table)?;
    let crb = cramer_rao(&exp.discrete_fim(eta)?)?;
    Ok(MonteCarloSummary {
        parameters: names,
        trials: rep.trials.len(),
        failures: rep.failures(),
        converged: rep.converged(),
        mean: rep.mean.iter().copied().collect(),
        covariance: rows(&rep.covariance),
        crb: rows(&crb),
        covariance_matrix: rep.covariance,
        crb_matrix: crb,
    })
}

pub fn run_montecarlo(exp: &Experiment, out: &Path) -> Result<MonteCarloSummary> {
    let eta = exp.simulate(exp.initial_control()?)?;
    let summary = monte_carlo_block(exp, &eta, out, "montecarlo.csv")?;
    write_json(out, "montecarlo.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryReport {
    pub j: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub fim: InfoSummary,
    pub monte_carlo: MonteCarloSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub parameters: Vec<String>,
    pub optimizer_stop: OptimizerStop,
    pub iterations: usize,
    pub lambda_min_ratio: f64,
    pub initial: TrajectoryReport,
    pub optimized: TrajectoryReport,
    /// Per-parameter Monte-Carlo variance, initial over optimized.
    pub variance_ratio: Vec<f64>,
}

/// Initial versus optimized trajectory: information, bounds and
/// Monte-Carlo spread, in the shape of a results table.
pub fn run_report(exp: &Experiment, out: &Path, progress: impl FnMut(&IterationRecord)) -> Result<Report> {
    let opt = run_optimize(exp, out, progress)?;
    let names = exp.parameter_names();
    let initial = opt.initial.as_ref().expect("set by run_optimize");
    let optimized = opt.optimized.as_ref().expect("set by run_optimize");
    let block = |eta: &ExtendedTrajectory, tag: &str, j: f64, lmin: f64, lmax: f64| -> Result<TrajectoryReport> {
        let fim = exp.discrete_fim(eta)?;
        write_matrix(create(out, &format!("fim_{tag}.csv"))?, &names, &fim.matrix)?;
        let mc = monte_carlo_block(exp, eta, out, &format!("montecarlo_{tag}.csv"))?;
        write_matrix(create(out, &format!("crb_{tag}.csv"))?, &names, &mc.crb_matrix)?;
        write_matrix(create(out, &format!("covariance_{tag}.csv"))?, &names, &mc.covariance_matrix)?;
        Ok(TrajectoryReport {
            j,
            lambda_min: lmin,
            lambda_max: lmax,
            fim: fim.summary(&names, IDENTIFIABILITY_THRESHOLD),
            monte_carlo: mc,
        })
    };
    let initial = block(initial, "initial", opt.j_initial, opt.lambda_min_initial, opt.lambda_max_initial)?;
    let optimized = block(optimized, "optimized", opt.j_final, opt.lambda_min_final, opt.lambda_max_final)?;
    let variance_ratio = (0..names.len())
        .map(|i| initial.monte_carlo.covariance_matrix[(i, i)] / optimized.monte_carlo.covariance_matrix[(i, i)])
        .collect();
    let report = Report {
        parameters: names,
        optimizer_stop: opt.stop,
        iterations: opt.iterations,
        lambda_min_ratio: optimized.lambda_min / initial.lambda_min,
        initial,
        optimized,
        variance_ratio,
    };
    write_json(out, "report.json", &report)?;
    std::fs::write(out.join("report.md"), report.to_markdown())?;
    Ok(report)
}

fn fmt_matrix(m: &[Vec<f64>]) -> String {
    let rows: Vec<String> = m
        .iter()
        .map(|r| r.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join("; "))
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("## Optimization\n\n| trajectory | lambda_max | lambda_min | J |\n|---|---|---|---|\n");
        for (name, r) in [("initial", &self.initial), ("optimized", &self.optimized)] {
            s.push_str(&format!("| {name} | {:.4e} | {:.4e} | {:.4e} |\n", r.lambda_max, r.lambda_min, r.j));
        }
        s.push_str(&format!(
            "\nlambda_min ratio {:.4e} after {} iteration(s), stop: {:?}\n",
            self.lambda_min_ratio, self.iterations, self.optimizer_stop
        ));
        s.push_str(&format!(
            "\n## Monte-Carlo ({} trials, parameters {})\n\n| trajectory | mean | covariance | Cramer-Rao bound | failures |\n|---|---|---|---|---|\n",
            self.initial.monte_carlo.trials,
            self.parameters.join(", ")
        ));
        for (name, r) in [("initial", &self.initial), ("optimized", &self.optimized)] {
            let mc = &r.monte_carlo;
            s.push_str(&format!(
                "| {name} | {} | {} | {} | {} |\n",
                fmt_matrix(&[mc.mean.clone()]),
                fmt_matrix(&mc.covariance),
                fmt_matrix(&mc.crb),
                mc.failures
            ));
        }
        let ratios: Vec<String> = self.variance_ratio.iter().map(|v| format!("{v:.4e}")).collect();
        s.push_str(&format!("\nvariance ratio (initial / optimized): {}\n", ratios.join(", ")));
        s
    }
}
