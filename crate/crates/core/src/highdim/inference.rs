//! Approximate proximal Newton steps with replicate output for the
//! ℓ1-regularized least-squares problem.
//!
//! Each outer step runs two feature-sampled SVRG tracks in lock step:
//! the `g` track solves `Ŝg = g⁰` for a stochastic gradient `g⁰` (its
//! epoch average is the replicate), the `d` track solves the proximal
//! Newton subproblem that moves the point estimate.

use rand::Rng;

use crate::approx_newton::{sample_inner_batch, Algorithm, InferenceRun, NewtonInferConfig, Replicate};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm2};
use crate::model::Dataset;
use crate::rng::{child_stream, tag, StreamRng};

use super::config::HighDimConfig;
use super::objective::{response_correlation, smooth_gradient};
use super::lazy::LazyTrack;
use super::prox_svrg::check_positive_definite;
use super::soft_threshold::SoftThresholdCov;

/// Same trust region as the low-dimensional engines.
const DIVERGENCE_RADIUS: f64 = 1e6;

/// Output of one outer step.
#[derive(Debug, Clone)]
pub struct ProximalNewtonStep {
    /// Average of `g^0, …, g^L` (epoch ends).
    pub g_bar: Vec<f64>,
    pub g_last: Vec<f64>,
    /// Average of `d^0, …, d^L`.
    pub d_bar: Vec<f64>,
    pub d_last: Vec<f64>,
}

/// Run `epochs` SVRG epochs of both tracks at `theta`.
///
/// `g0` is the (negated) stochastic gradient and `d0 = −(Ŝθ − b)`.
#[allow(clippy::too_many_arguments)]
pub fn proximal_newton_step(
    cov: &SoftThresholdCov<'_>,
    theta: &[f64],
    g0: &[f64],
    d0: &[f64],
    lambda: f64,
    epochs: usize,
    cfg: &HighDimConfig,
    rng: &mut StreamRng,
) -> ProximalNewtonStep {
    let p = cov.p();
    let (tau, eta) = (cfg.tau(p), cfg.eta(p));
    let inner = cfg.inner_len(p);
    let mut batch = Vec::with_capacity(cfg.inner_batch);

    let mut g = g0.to_vec();
    let mut d = d0.to_vec();
    let mut g_sum = g0.to_vec();
    let mut d_sum = d0.to_vec();
    let mut u = vec![0.0; p];
    let mut v = vec![0.0; p];
    for _ in 0..epochs {
        cov.matvec_into(&g, &mut u);
        cov.matvec_into(&d, &mut v);
        for j in 0..p {
            u[j] -= g0[j];
            v[j] -= d0[j];
        }
        let mut g_track = LazyTrack::new(&g, &u, tau, None);
        let mut d_track = LazyTrack::new(&d, &v, eta, Some((theta, eta * lambda)));
        for _ in 0..inner {
            sample_inner_batch(rng, p, cfg.inner_batch, &mut batch);
            g_track.step(cov, &batch, &g);
            d_track.step(cov, &batch, &d);
        }
        let g_next = g_track.current().to_vec();
        let d_next = d_track.current().to_vec();
        g = g_next;
        d = d_next;
        for j in 0..p {
            g_sum[j] += g[j];
            d_sum[j] += d[j];
        }
    }
    let c = 1.0 / (epochs + 1) as f64;
    ProximalNewtonStep {
        g_bar: g_sum.iter().map(|v| v * c).collect(),
        g_last: g,
        d_bar: d_sum.iter().map(|v| v * c).collect(),
        d_last: d,
    }
}

/// Loop sizes of a high-dimensional run expressed in the common config
/// record carried by [`InferenceRun`] (`ρ ≡ 1`, `L = L_i`).
fn run_config(cfg: &HighDimConfig, p: usize) -> NewtonInferConfig {
    NewtonInferConfig {
        outer_iterations: cfg.outer_iterations,
        inner_iterations: cfg.inner_len(p),
        outer_batch: cfg.outer_batch,
        inner_batch: cfg.inner_batch,
        rho0: 1.0,
        d_o: 0.0,
        tau0: cfg.tau(p),
        d_i: 0.0,
        inner_growth: 0.0,
        seed: cfg.seed,
        ..NewtonInferConfig::default()
    }
}

/// Statistical inference for the modified LASSO.
///
/// Returns the run (replicates `√S_o · ḡ_t`) and the final iterate
/// `θ_T` as point estimate.
pub fn highdim_inference(
    data: &Dataset,
    cov: &SoftThresholdCov<'_>,
    lambda: f64,
    cfg: &HighDimConfig,
    theta0: &[f64],
) -> Result<(InferenceRun, Vec<f64>)> {
    let (n, p) = (data.n(), data.p());
    if theta0.len() != p {
        return Err(Error::usage(format!("theta0 has length {}, expected {p}", theta0.len())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::config("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    cfg.validate(n, p)?;
    check_positive_definite(cov, cfg.dense_limit)?;

    let b = response_correlation(data);
    let mut outer_rng = child_stream(cfg.seed, 0, tag::OUTER);
    let mut inner_rng = child_stream(cfg.seed, 0, tag::INNER);
    let radius = DIVERGENCE_RADIUS * (1.0 + norm2(theta0));

    let mut theta = theta0.to_vec();
    let mut trace = Vec::with_capacity(cfg.outer_iterations + 1);
    trace.push(theta.clone());
    let mut replicates = Vec::with_capacity(cfg.outer_iterations);
    let mut g0 = vec![0.0; p];
    for t in 0..cfg.outer_iterations {
        g0.iter_mut().for_each(|v| *v = 0.0);
        let w = -1.0 / cfg.outer_batch as f64;
        for _ in 0..cfg.outer_batch {
            let k = outer_rng.gen_range(0..n);
            let x = data.row(k);
            let r = crate::linalg::dot(x, &theta) - data.y()[k];
            for (g, xj) in g0.iter_mut().zip(x) {
                *g += w * r * xj;
            }
        }
        let d0: Vec<f64> = smooth_gradient(&theta, cov, &b).iter().map(|v| -v).collect();
        let step = proximal_newton_step(cov, &theta, &g0, &d0, lambda, cfg.epochs_at(t, p), cfg, &mut inner_rng);
        for (th, d) in theta.iter_mut().zip(&step.d_bar) {
            *th += d;
        }
        if !all_finite(&theta) || !all_finite(&step.g_bar) {
            return Err(Error::numeric(format!("non-finite iterate at outer step {t}")));
        }
        let dist = norm2(&crate::linalg::sub(&theta, theta0));
        if dist > radius {
            return Err(Error::Divergence(format!(
                "outer step {t}: ‖θ − θ₀‖ = {dist:.3e} exceeds {radius:.3e}"
            )));
        }
        replicates.push(Replicate::new(t, step.g_bar, 1.0, cfg.outer_batch, None));
        trace.push(theta.clone());
    }
    let run = InferenceRun::new(Algorithm::HighDim, trace, replicates, cfg.outer_batch, run_config(cfg, p));
    Ok((run, theta))
}
