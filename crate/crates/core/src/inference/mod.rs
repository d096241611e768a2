//! Covariance assembly, confidence intervals, tests and dense oracles.

mod covariance;
mod coverage;
mod exact_solver;
mod intervals;
mod ks;
mod normal;

pub use covariance::{
    covariance_from_replicates, covariance_from_run, plugin_sandwich_lowdim, CovarianceEstimate, CovarianceMeta,
    CovarianceSource, DENSE_PLUGIN_LIMIT,
};
pub use coverage::{
    coverage_simulation, run_method, simulate_one, CoverageReport, MethodOutput, MethodSettings, SimOutcome,
    MAX_FAILURE_FRACTION,
};
pub use exact_solver::{exact_solver, normal_equations, GRADIENT_TOLERANCE};
pub use intervals::{
    bonferroni_threshold, confidence_intervals, confidence_intervals_from_variances, z_test_pvalue,
    z_test_pvalues, z_test_pvalues_from_variances, ConfidenceIntervals,
};
pub use ks::{ks_critical_value, ks_statistic_uniform};
pub use normal::{normal_cdf, normal_quantile, normal_sf};
