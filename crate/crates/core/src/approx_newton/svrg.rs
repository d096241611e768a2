//! SVRG point estimation alongside the stochastic Newton replicate track.

use super::engine::{run_engine, sample_inner_batch, HvpScratch, OuterSampling, PointTrack, SvrgTrack};
use super::run::{Algorithm, InferenceRun};
use super::NewtonInferConfig;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, sym_eigenvalues};
use crate::model::{Dataset, LossModel};
use crate::rng;

/// Largest dimension for which the strong-convexity constant is computed
/// from a dense Hessian.
pub const DENSE_CURVATURE_LIMIT: usize = 64;

/// Outer epochs of the default warm start.
pub const WARM_START_EPOCHS: usize = 5;

/// Step size and inner length suggested by the SVRG analysis:
/// `η = 1/(10 max β_i)`, `L ≥ 20 max β_i / α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrgDefaults {
    /// `max_i β_i` with `β_i = ‖x_i‖²` (exact smoothness for the squared loss,
    /// conservative for the logistic loss).
    pub max_beta: f64,
    /// Smallest Hessian eigenvalue at the reference point; `None` above
    /// [`DENSE_CURVATURE_LIMIT`].
    pub alpha: Option<f64>,
    pub eta: f64,
    pub min_inner: Option<usize>,
}

pub fn svrg_defaults(loss: LossModel, data: &Dataset, theta: &[f64]) -> Result<SvrgDefaults> {
    let max_beta = loss.max_curvature_bound(data);
    if !(max_beta > 0.0 && max_beta.is_finite()) {
        return Err(Error::numeric("smoothness bound is zero or non-finite"));
    }
    let eta = 1.0 / (10.0 * max_beta);
    let alpha = if data.p() <= DENSE_CURVATURE_LIMIT {
        let h = loss.hessian(data, theta);
        let min = sym_eigenvalues(&h)[0];
        if !(min > 0.0) {
            return Err(Error::LinearAlgebra(format!(
                "Hessian is not positive definite at the reference point (smallest eigenvalue {min:.3e})"
            )));
        }
        Some(min)
    } else {
        None
    };
    let min_inner = alpha.map(|a| (20.0 * max_beta / a).ceil() as usize);
    Ok(SvrgDefaults {
        max_beta,
        alpha,
        eta,
        min_inner,
    })
}

/// SVRG point track with the stochastic Newton replicate track: the
/// replicates are drawn exactly as in [`super::run_inference`], while
/// `θ_{t+1} = θ_t + d̄_t` with `d^0 = −η∇f(θ_t)` and
/// `d^{j+1} = d^j − η (ĝ_I(θ_t + d^j) − ĝ_I(θ_t)) + d^0` on the same inner batches.
pub fn run_inference_svrg(
    loss: LossModel,
    data: &Dataset,
    theta0: &[f64],
    cfg: &NewtonInferConfig,
    eta: f64,
) -> Result<InferenceRun> {
    run_engine(
        loss,
        data,
        theta0,
        cfg,
        OuterSampling::WithReplacement { batch: cfg.outer_batch },
        PointTrack::Svrg { eta },
        Algorithm::Svrg,
    )
}

/// Runs only the SVRG point track for `epochs` outer steps of `inner` inner
/// iterations each.
pub fn svrg_point_estimate(
    loss: LossModel,
    data: &Dataset,
    theta0: &[f64],
    eta: f64,
    epochs: usize,
    inner: usize,
    inner_batch: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if inner_batch == 0 || inner_batch > data.n() {
        return Err(Error::config("inner_batch", "must lie in [1, n]"));
    }
    let mut rng = rng::child_stream(seed, 0, rng::tag::WARM_START);
    let mut theta = theta0.to_vec();
    let mut scratch = HvpScratch::new(data.p());
    let mut batch = Vec::with_capacity(inner_batch);
    for t in 0..epochs {
        let mut track = SvrgTrack::new(loss, data, &theta, eta);
        for _ in 0..inner {
            sample_inner_batch(&mut rng, data.n(), inner_batch, &mut batch);
            track.step(loss, data, &theta, &batch, eta, &mut scratch);
        }
        for (th, d) in theta.iter_mut().zip(track.average()) {
            *th += d;
        }
        if !all_finite(&theta) {
            return Err(Error::numeric(format!("non-finite SVRG warm start at epoch {t}")));
        }
    }
    Ok(theta)
}

/// Default starting point: [`WARM_START_EPOCHS`] SVRG epochs from the origin,
/// with the default step and `max(L, 20 max β / α)` inner iterations.
pub fn warm_start(loss: LossModel, data: &Dataset, cfg: &NewtonInferConfig) -> Result<Vec<f64>> {
    let zero = vec![0.0; data.p()];
    let d = svrg_defaults(loss, data, &zero)?;
    let inner = d.min_inner.unwrap_or(0).max(cfg.inner_iterations);
    svrg_point_estimate(
        loss,
        data,
        &zero,
        d.eta,
        WARM_START_EPOCHS,
        inner,
        cfg.inner_batch.min(data.n()),
        cfg.seed,
    )
}
