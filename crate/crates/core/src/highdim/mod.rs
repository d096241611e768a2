//! ℓ1-regularized linear regression with `p ≫ n`: soft-thresholded
//! covariance, proximal SVRG point estimate, proximal Newton inference and
//! the de-biased estimator.

mod config;
mod debias;
mod inference;
mod lazy;
mod objective;
mod prox_svrg;
mod soft_threshold;
mod tuning;

pub use config::{DebiasMode, HighDimConfig, VarianceSource};
pub use debias::{
    conjugate_gradient, debias_point, debiased_estimator, plugin_sandwich_highdim, residual_gradient,
    svrg_quadratic_solve, DebiasedEstimate, Sandwich, SandwichMode, DEBIAS_TOLERANCE,
};
pub use inference::{highdim_inference, proximal_newton_step, ProximalNewtonStep};
pub use objective::{kkt_violation, modified_lasso_objective, prox_l1, response_correlation, smooth_gradient, smooth_objective};
pub use prox_svrg::{check_positive_definite, prox_svrg_point_estimate, MAX_STRIKES, OBJECTIVE_SLACK};
pub use soft_threshold::{shrink, shrink_matrix, CovStorage, SoftThresholdCov};
pub use tuning::{
    best_conditioned_c_omega, cv_lasso, default_hyperparams, lasso, penalty_formula, rate, rate_for,
    resolve_hyperparams, CvLasso, Hyperparams,
};

use crate::approx_newton::InferenceRun;
use crate::error::Result;
use crate::model::Dataset;

/// Everything the high-dimensional pipeline produces for one data set.
#[derive(Debug, Clone)]
pub struct HighDimResult {
    pub hyper: Hyperparams,
    pub storage: CovStorage,
    pub run: InferenceRun,
    /// `θ_T` of the inference run.
    pub theta_final: Vec<f64>,
    /// De-biased estimate with variances from `cfg.variance`.
    pub estimate: DebiasedEstimate,
    /// `max_j |θ̂ᵈ_exact − θ̂ᵈ_svrg|` when both were computed.
    pub debias_gap: Option<f64>,
}

/// `(S_o/T) Σ_t ḡ_t(j)²`, the diagonal of the replicate covariance.
pub fn replicate_variances(run: &InferenceRun) -> Vec<f64> {
    let p = run.p();
    let mut v = vec![0.0; p];
    for r in &run.replicates {
        for (vj, s) in v.iter_mut().zip(&r.scaled) {
            *vj += s * s;
        }
    }
    let t = run.replicates.len().max(1) as f64;
    v.iter_mut().for_each(|x| *x /= t);
    v
}

/// Hyperparameters → point estimate → inference run → de-biased estimate.
pub fn run_highdim(data: &Dataset, cfg: &HighDimConfig) -> Result<HighDimResult> {
    cfg.validate(data.n(), data.p())?;
    let hyper = resolve_hyperparams(data, cfg)?;
    let cov = SoftThresholdCov::auto(data, hyper.omega, cfg.dense_limit)?;
    let p = data.p();
    let theta_hat = prox_svrg_point_estimate(data, &cov, hyper.lambda, cfg, &vec![0.0; p])?;
    let (run, theta_final) = highdim_inference(data, &cov, hyper.lambda, cfg, &theta_hat)?;

    let theta_d = debias_point(data, &theta_hat, &cov, cfg.debias_mode, cfg)?;
    let debias_gap = if p <= cfg.dense_limit {
        let other = match cfg.debias_mode {
            DebiasMode::ExactDense => DebiasMode::Svrg,
            DebiasMode::Svrg => DebiasMode::ExactDense,
        };
        let alt = debias_point(data, &theta_hat, &cov, other, cfg)?;
        let gap = theta_d.iter().zip(&alt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        log::info!("de-bias exact/SVRG agreement: max abs difference {gap:.3e}");
        Some(gap)
    } else {
        None
    };

    let n = data.n() as f64;
    let variance = match cfg.variance {
        VarianceSource::Replicates => replicate_variances(&run).iter().map(|v| v / n).collect(),
        VarianceSource::Plugin => {
            let mode = if p <= cfg.dense_limit { SandwichMode::Dense } else { SandwichMode::Diagonal };
            plugin_sandwich_highdim(data, &theta_hat, &cov, mode, cfg.dense_limit)?
                .diagonal()
                .iter()
                .map(|v| v / n)
                .collect()
        }
    };
    Ok(HighDimResult {
        hyper,
        storage: cov.storage(),
        run,
        theta_final,
        estimate: DebiasedEstimate {
            theta_hat,
            theta_d,
            variance,
        },
        debias_gap,
    })
}
