//! Named simulation settings: data generator, truth and method
//! hyperparameters for every experiment the command line can run.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::approx_newton::{NewtonInferConfig, StepCap};
use crate::error::{Error, Result};
use crate::highdim::HighDimConfig;
use crate::model::{
    generate_linear, generate_logistic, generate_ma_timeseries, generate_mean_series, generate_sparse_highdim,
    logistic_truth, CovarianceSpec, Dataset, LossModel, SyntheticTruth,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetName {
    #[serde(rename = "lin1")]
    Lin1,
    #[serde(rename = "lin2")]
    Lin2,
    #[serde(rename = "log1")]
    Log1,
    #[serde(rename = "log2")]
    Log2,
    #[serde(rename = "tsma")]
    TsMa,
    #[serde(rename = "highdim-null")]
    HighDimNull,
    #[serde(rename = "highdim-sparse")]
    HighDimSparse,
    #[serde(rename = "mean-est")]
    MeanEst,
}

impl PresetName {
    pub const ALL: [PresetName; 8] = [
        PresetName::Lin1,
        PresetName::Lin2,
        PresetName::Log1,
        PresetName::Log2,
        PresetName::TsMa,
        PresetName::HighDimNull,
        PresetName::HighDimSparse,
        PresetName::MeanEst,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Lin1 => "lin1",
            PresetName::Lin2 => "lin2",
            PresetName::Log1 => "log1",
            PresetName::Log2 => "log2",
            PresetName::TsMa => "tsma",
            PresetName::HighDimNull => "highdim-null",
            PresetName::HighDimSparse => "highdim-sparse",
            PresetName::MeanEst => "mean-est",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .iter()
            .find(|p| p.as_str() == s.to_ascii_lowercase())
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = PresetName::ALL.iter().map(|p| p.as_str()).collect();
                Error::config("preset", format!("unknown preset `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// How a preset's data set is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Linear {
        n: usize,
        covariance: CovarianceSpec,
        theta_star: Vec<f64>,
        sigma: f64,
    },
    Logistic {
        n: usize,
        covariance: CovarianceSpec,
        /// Class-mean shift `μ`; classes are `N(±μ, Σ)`.
        shift: Vec<f64>,
    },
    MaTimeSeries {
        n: usize,
        theta_star: Vec<f64>,
        a: f64,
        b: f64,
        z_sigma: f64,
    },
    SparseHighDim {
        n: usize,
        p: usize,
        s: usize,
        amplitude: f64,
        sigma: f64,
    },
    MeanSeries {
        n: usize,
        mean: Vec<f64>,
        a: f64,
        b: f64,
        z_sigma: f64,
    },
}

impl DataSpec {
    pub fn loss(&self) -> LossModel {
        match self {
            DataSpec::Logistic { .. } => LossModel::Logistic,
            DataSpec::MeanSeries { .. } => LossModel::MeanEstimation,
            _ => LossModel::SquaredLinear,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            DataSpec::Linear { n, .. }
            | DataSpec::Logistic { n, .. }
            | DataSpec::MaTimeSeries { n, .. }
            | DataSpec::SparseHighDim { n, .. }
            | DataSpec::MeanSeries { n, .. } => *n,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            DataSpec::Linear { theta_star, .. } | DataSpec::MaTimeSeries { theta_star, .. } => theta_star.len(),
            DataSpec::Logistic { shift, .. } => shift.len(),
            DataSpec::SparseHighDim { p, .. } => *p,
            DataSpec::MeanSeries { mean, .. } => mean.len(),
        }
    }

    /// Population parameter the intervals should cover.
    pub fn truth(&self) -> Result<Vec<f64>> {
        match self {
            DataSpec::Linear { theta_star, .. } | DataSpec::MaTimeSeries { theta_star, .. } => Ok(theta_star.clone()),
            DataSpec::Logistic { covariance, shift, .. } => logistic_truth(covariance, shift),
            DataSpec::SparseHighDim { p, s, amplitude, .. } => {
                let mut t = vec![0.0; *p];
                t[..*s].iter_mut().for_each(|v| *v = *amplitude);
                Ok(t)
            }
            DataSpec::MeanSeries { mean, .. } => Ok(mean.clone()),
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        match self {
            DataSpec::Linear {
                n,
                covariance,
                theta_star,
                sigma,
            } => generate_linear(*n, covariance, &SyntheticTruth::dense(theta_star.clone(), *sigma), seed),
            DataSpec::Logistic { n, covariance, shift } => generate_logistic(*n, covariance, shift, seed),
            DataSpec::MaTimeSeries {
                n,
                theta_star,
                a,
                b,
                z_sigma,
            } => generate_ma_timeseries(*n, theta_star.len(), theta_star, (*a, *b), *z_sigma, seed),
            DataSpec::SparseHighDim {
                n,
                p,
                s,
                amplitude,
                sigma,
            } => generate_sparse_highdim(*n, *p, *s, *amplitude, *sigma, seed).map(|(d, _)| d),
            DataSpec::MeanSeries {
                n,
                mean,
                a,
                b,
                z_sigma,
            } => generate_mean_series(*n, mean, (*a, *b), *z_sigma, seed),
        }
    }

    /// Replace the sample size.
    pub fn with_n(mut self, new_n: usize) -> Self {
        match &mut self {
            DataSpec::Linear { n, .. }
            | DataSpec::Logistic { n, .. }
            | DataSpec::MaTimeSeries { n, .. }
            | DataSpec::SparseHighDim { n, .. }
            | DataSpec::MeanSeries { n, .. } => *n = new_n,
        }
        self
    }
}

/// Inference procedure applied to each simulated data set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Stochastic approximate Newton steps with SGD inner solves.
    Sgd,
    /// SVRG point track with SGD replicates.
    Svrg,
    /// Exact minimizer and plug-in sandwich covariance.
    Oracle,
    /// Circular-block outer sampling.
    TimeSeries,
    /// Proximal Newton inference and the de-biased estimator.
    HighDim,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Svrg => "svrg",
            Method::Oracle => "oracle",
            Method::TimeSeries => "timeseries",
            Method::HighDim => "highdim",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::Sgd, Method::Svrg, Method::Oracle, Method::TimeSeries, Method::HighDim]
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config("method", format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub data: DataSpec,
    pub method: Method,
    pub newton: NewtonInferConfig,
    /// Block length for time-series inference.
    pub lag: Option<usize>,
    pub highdim: HighDimConfig,
    pub n_sims: usize,
    pub level: f64,
}

fn constant(p: usize, v: f64) -> Vec<f64> {
    vec![v; p]
}

fn lowdim_newton(t: usize, l: usize, rho0: f64, tau0: f64) -> NewtonInferConfig {
    NewtonInferConfig {
        outer_iterations: t,
        inner_iterations: l,
        outer_batch: 10,
        inner_batch: 10,
        rho0,
        d_o: 2.0 / 3.0,
        tau0,
        d_i: 2.0 / 3.0,
        delta0: 0.01,
        inner_growth: 0.0,
        step_cap: StepCap::InverseCurvature,
        seed: 0,
    }
}

/// The built-in settings for `name`.
pub fn preset(name: PresetName) -> ExperimentPreset {
    let toeplitz = CovarianceSpec::ToeplitzDecay { rate: 0.4 };
    let lin = |covariance| DataSpec::Linear {
        n: 100,
        covariance,
        theta_star: constant(10, 1.0 / 10f64.sqrt()),
        sigma: 0.7,
    };
    let log = |covariance| DataSpec::Logistic {
        n: 100,
        covariance,
        shift: constant(10, 0.1 / 10f64.sqrt()),
    };
    let base = |name, data, method, newton| ExperimentPreset {
        name,
        data,
        method,
        newton,
        lag: None,
        highdim: HighDimConfig::default(),
        n_sims: 200,
        level: 0.95,
    };
    match name {
        PresetName::Lin1 => base(name, lin(CovarianceSpec::Identity), Method::Sgd, lowdim_newton(100, 200, 0.1, 20.0)),
        PresetName::Lin2 => base(name, lin(toeplitz), Method::Sgd, lowdim_newton(100, 100, 0.7, 1.0)),
        PresetName::Log1 => base(name, log(CovarianceSpec::Identity), Method::Sgd, lowdim_newton(50, 100, 0.1, 2.0)),
        PresetName::Log2 => base(name, log(toeplitz), Method::Sgd, lowdim_newton(50, 100, 0.1, 5.0)),
        PresetName::TsMa => ExperimentPreset {
            lag: Some(3),
            n_sims: 100,
            ..base(
                name,
                DataSpec::MaTimeSeries {
                    n: 200,
                    theta_star: constant(20, 1.0 / 20f64.sqrt()),
                    a: 0.6,
                    b: 0.8,
                    z_sigma: 0.7,
                },
                Method::TimeSeries,
                NewtonInferConfig {
                    outer_batch: 1,
                    ..lowdim_newton(400, 100, 0.1, 1.0)
                },
            )
        },
        PresetName::HighDimNull | PresetName::HighDimSparse => {
            let s = if name == PresetName::HighDimSparse { 8 } else { 0 };
            base(
                name,
                DataSpec::SparseHighDim {
                    n: 600,
                    p: 1000,
                    s,
                    amplitude: 1.0 / 8f64.sqrt(),
                    sigma: 0.7,
                },
                Method::HighDim,
                NewtonInferConfig::default(),
            )
        }
        PresetName::MeanEst => ExperimentPreset {
            lag: Some(10),
            ..base(
                name,
                DataSpec::MeanSeries {
                    n: 500,
                    mean: vec![1.0],
                    a: 0.6,
                    b: 0.8,
                    z_sigma: 0.7,
                },
                Method::TimeSeries,
                NewtonInferConfig {
                    outer_iterations: 100_000,
                    inner_iterations: 1,
                    outer_batch: 1,
                    inner_batch: 1,
                    ..lowdim_newton(100_000, 1, 0.1, 1.0)
                },
            )
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in PresetName::ALL {
            assert_eq!(name.as_str().parse::<PresetName>().unwrap(), name);
            let json = serde_json::to_string(&name).unwrap();
            assert_eq!(json, format!("\"{}\"", name.as_str()));
            assert_eq!(preset(name).name, name);
        }
        assert!("lin3".parse::<PresetName>().is_err());
        assert_eq!("SVRG".parse::<Method>().unwrap(), Method::Svrg);
    }

    #[test]
    fn lin1_matches_the_published_setting() {
        let p = preset(PresetName::Lin1);
        let c = &p.newton;
        assert_eq!((c.outer_iterations, c.inner_iterations, c.outer_batch, c.inner_batch), (100, 200, 10, 10));
        assert_eq!((c.rho0, c.tau0), (0.1, 20.0));
        assert!((c.d_o - 2.0 / 3.0).abs() < 1e-15 && (c.d_i - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.data.n(), 100);
        assert_eq!(p.data.p(), 10);
        let t = p.data.truth().unwrap();
        assert!((t[0] - 0.31622776601683794).abs() < 1e-15);
    }

    #[test]
    fn other_lowdim_presets() {
        let l2 = preset(PresetName::Lin2).newton;
        assert_eq!((l2.rho0, l2.inner_iterations, l2.tau0), (0.7, 100, 1.0));
        let g1 = preset(PresetName::Log1).newton;
        assert_eq!((g1.outer_iterations, g1.inner_iterations, g1.tau0, g1.delta0), (50, 100, 2.0, 0.01));
        assert_eq!(preset(PresetName::Log2).newton.tau0, 5.0);
        let truth = preset(PresetName::Log1).data.truth().unwrap();
        assert!((truth[0] - 0.2 / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn generated_sizes_match() {
        for name in PresetName::ALL {
            let p = preset(name);
            let d = p.data.clone().with_n(p.data.n().min(50)).generate(3).unwrap();
            assert_eq!(d.p(), p.data.p(), "{name}");
            assert_eq!(p.data.truth().unwrap().len(), p.data.p());
        }
    }

    #[test]
    fn preset_json_round_trip() {
        let p = preset(PresetName::TsMa);
        let json = serde_json::to_string(&p).unwrap();
        let back: ExperimentPreset = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
