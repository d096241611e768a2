//! Monte Carlo coverage of confidence intervals over simulated data sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::{covariance_from_run, plugin_sandwich_lowdim, CovarianceEstimate};
use super::exact_solver::exact_solver;
use super::intervals::{confidence_intervals, confidence_intervals_from_variances, ConfidenceIntervals};
use crate::approx_newton::{run_inference, run_inference_svrg, svrg_defaults, warm_start, InferenceRun, NewtonInferConfig};
use crate::error::{Error, Result};
use crate::highdim::{run_highdim, HighDimConfig, HighDimResult};
use crate::model::{Dataset, LossModel};
use crate::presets::{ExperimentPreset, Method};
use crate::rng::{derive_seed, tag};
use crate::time_series::{default_lag, run_inference_timeseries};

/// Fraction of simulations that may fail before the whole run is an error.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageReport {
    pub preset: String,
    pub method: Method,
    pub n_sims: usize,
    /// Share of covered `(simulation, coordinate)` pairs among successful simulations.
    pub coverage: f64,
    pub avg_length: f64,
    pub failures: usize,
    pub seed: u64,
}

/// Everything one method produces on one data set.
#[derive(Debug, Clone)]
pub struct MethodOutput {
    pub intervals: ConfidenceIntervals,
    /// Covariance of `√n(θ̂ − θ*)`, for the low-dimensional methods.
    pub covariance: Option<CovarianceEstimate>,
    pub run: Option<InferenceRun>,
    pub highdim: Option<HighDimResult>,
}

/// Settings consumed by [`run_method`].
#[derive(Debug, Clone)]
pub struct MethodSettings<'a> {
    pub method: Method,
    pub loss: LossModel,
    pub newton: &'a NewtonInferConfig,
    pub lag: Option<usize>,
    pub highdim: &'a HighDimConfig,
    pub level: f64,
}

/// Estimate, infer and build intervals with one method.
///
/// The stochastic low-dimensional methods start from [`warm_start`] and
/// centre the intervals on the averaged iterate.
pub fn run_method(data: &Dataset, s: &MethodSettings<'_>) -> Result<MethodOutput> {
    let n = data.n();
    let lowdim = |run: InferenceRun| -> Result<MethodOutput> {
        let cov = covariance_from_run(&run)?;
        let intervals = confidence_intervals(&run.theta_avg, &cov, n, s.level)?;
        Ok(MethodOutput {
            intervals,
            covariance: Some(cov),
            run: Some(run),
            highdim: None,
        })
    };
    match s.method {
        Method::Sgd => {
            s.newton.validate_bounds(n)?;
            let theta0 = warm_start(s.loss, data, s.newton)?;
            lowdim(run_inference(s.loss, data, &theta0, s.newton)?)
        }
        Method::Svrg => {
            s.newton.validate_bounds(n)?;
            let theta0 = warm_start(s.loss, data, s.newton)?;
            let eta = svrg_defaults(s.loss, data, &theta0)?.eta;
            lowdim(run_inference_svrg(s.loss, data, &theta0, s.newton, eta)?)
        }
        Method::TimeSeries => {
            s.newton.validate_bounds(n)?;
            let lag = s.lag.unwrap_or_else(|| default_lag(n));
            let theta0 = warm_start(s.loss, data, s.newton)?;
            lowdim(run_inference_timeseries(s.loss, data, &theta0, s.newton, lag)?)
        }
        Method::Oracle => {
            let theta = exact_solver(s.loss, data, &vec![0.0; data.p()])?;
            let cov = plugin_sandwich_lowdim(s.loss, data, &theta)?;
            let intervals = confidence_intervals(&theta, &cov, n, s.level)?;
            Ok(MethodOutput {
                intervals,
                covariance: Some(cov),
                run: None,
                highdim: None,
            })
        }
        Method::HighDim => {
            if s.loss != LossModel::SquaredLinear {
                return Err(Error::config("method", "high-dimensional inference needs the squared loss"));
            }
            let res = run_highdim(data, s.highdim)?;
            // variances are already divided by n
            let intervals =
                confidence_intervals_from_variances(&res.estimate.theta_d, &res.estimate.variance, 1, s.level)?;
            Ok(MethodOutput {
                intervals,
                covariance: None,
                run: Some(res.run.clone()),
                highdim: Some(res),
            })
        }
    }
}

/// Covered coordinates and summed interval length of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutcome {
    pub covered: usize,
    pub total_length: f64,
}

/// Simulation `index` of a coverage run: data and algorithm seeds are child
/// seeds of `master_seed`.
pub fn simulate_one(preset: &ExperimentPreset, method: Method, master_seed: u64, index: usize) -> Result<SimOutcome> {
    let data = preset.data.generate(derive_seed(master_seed, index as u64, tag::DATA))?;
    let algo_seed = derive_seed(master_seed, index as u64, tag::ALGORITHM);
    let newton = NewtonInferConfig {
        seed: algo_seed,
        ..preset.newton.clone()
    };
    let highdim = HighDimConfig {
        seed: algo_seed,
        ..preset.highdim.clone()
    };
    let out = run_method(
        &data,
        &MethodSettings {
            method,
            loss: preset.data.loss(),
            newton: &newton,
            lag: preset.lag,
            highdim: &highdim,
            level: preset.level,
        },
    )?;
    let truth = preset.data.truth()?;
    Ok(SimOutcome {
        covered: out.intervals.covers(&truth).iter().filter(|c| **c).count(),
        total_length: out.intervals.lengths().iter().sum(),
    })
}

/// Coverage and average interval length over `n_sims` simulated data sets.
///
/// Simulations run on the current rayon pool; results are reduced in index
/// order so the report does not depend on the thread count. Failed
/// simulations are logged and excluded; more than
/// [`MAX_FAILURE_FRACTION`] of them is an error.
pub fn coverage_simulation(
    preset: &ExperimentPreset,
    n_sims: usize,
    master_seed: u64,
    method: Method,
) -> Result<CoverageReport> {
    if n_sims == 0 {
        return Err(Error::config("n_sims", "must be at least 1"));
    }
    let p = preset.data.p();
    let outcomes: Vec<Result<SimOutcome>> = (0..n_sims)
        .into_par_iter()
        .map(|i| simulate_one(preset, method, master_seed, i))
        .collect();

    let mut covered = 0usize;
    let mut length = 0.0;
    let mut ok = 0usize;
    let mut failures = 0usize;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                covered += o.covered;
                length += o.total_length;
                ok += 1;
            }
            Err(e) => {
                log::warn!("simulation {i} failed: {e}");
                failures += 1;
            }
        }
    }
    let allowed = (MAX_FAILURE_FRACTION * n_sims as f64).floor() as usize;
    if failures > allowed || ok == 0 {
        return Err(Error::PartialFailure {
            failed: failures,
            total: n_sims,
            allowed,
        });
    }
    let pairs = (ok * p) as f64;
    Ok(CoverageReport {
        preset: preset.name.to_string(),
        method,
        n_sims,
        coverage: covered as f64 / pairs,
        avg_length: length / pairs,
        failures,
        seed: master_seed,
    })
}
