//! Inference for dependent data: circular-block outer sampling and the
//! Newey-West reference estimator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::approx_newton::{run_engine, Algorithm, InferenceRun, NewtonInferConfig, OuterSampling, PointTrack};
use crate::error::{Error, Result};
use crate::model::{Dataset, LossModel};

/// Lag weights for the autocovariance terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HacWeighting {
    /// `w(j, l) = 1 − j/(l+1)`
    Bartlett,
    /// `w(j, l) = 1 − j/l`, the weighting implied by circular-block sampling.
    AlgorithmImplied,
}

impl HacWeighting {
    pub fn weight(&self, j: usize, l: usize) -> f64 {
        match self {
            HacWeighting::Bartlett => 1.0 - j as f64 / (l as f64 + 1.0),
            HacWeighting::AlgorithmImplied => 1.0 - j as f64 / l as f64,
        }
    }
}

/// Block length / lag `l` for a series of length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSamplerConfig {
    pub lag: usize,
    pub n: usize,
}

impl BlockSamplerConfig {
    pub fn new(lag: usize, n: usize) -> Result<Self> {
        if lag == 0 || lag > n {
            return Err(Error::usage(format!("lag {lag} must lie in [1, n = {n}]")));
        }
        Ok(Self { lag, n })
    }
}

/// Default lag `⌊n^{1/4}⌋` (at least 1).
pub fn default_lag(n: usize) -> usize {
    let mut l = (n as f64).powf(0.25).floor() as usize;
    // Guard against pow rounding just below an exact integer root.
    while (l + 1).pow(4) <= n {
        l += 1;
    }
    l.max(1)
}

/// Indices `(i_o + k) mod n` for `k < l`.
pub fn circular_block(i_o: usize, l: usize, n: usize) -> Result<Vec<usize>> {
    BlockSamplerConfig::new(l, n)?;
    if i_o >= n {
        return Err(Error::usage(format!("block start {i_o} out of range (n = {n})")));
    }
    Ok((0..l).map(|k| (i_o + k) % n).collect())
}

/// Stochastic Newton inference with circular-block outer sampling; replicates
/// are scaled by `√l`. With `l = 1` this is the i.i.d. engine with `S_o = 1`
/// and consumes the same random streams.
pub fn run_inference_timeseries(
    loss: LossModel,
    data: &Dataset,
    theta0: &[f64],
    cfg: &NewtonInferConfig,
    lag: usize,
) -> Result<InferenceRun> {
    if loss == LossModel::Logistic {
        return Err(Error::config("loss", "block-sampled inference supports least-squares losses only"));
    }
    BlockSamplerConfig::new(lag, data.n())?;
    run_engine(
        loss,
        data,
        theta0,
        cfg,
        OuterSampling::CircularBlock { len: lag },
        PointTrack::Newton,
        Algorithm::TimeSeries,
    )
}

/// Per-sample gradients `∇f_i(θ)` in series order.
pub fn gradients_at(loss: LossModel, data: &Dataset, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
    (0..data.n()).map(|i| loss.per_sample_gradient(data, i, theta)).collect()
}

/// Newey-West estimate
/// `(1/n)[Σ_i g_i g_iᵀ + Σ_{j=1}^{l} w(j,l) Σ_{i>j} (g_i g_{i−j}ᵀ + g_{i−j} g_iᵀ)]`.
pub fn newey_west(gradients: &[Vec<f64>], l: usize, weighting: HacWeighting) -> Result<DMatrix<f64>> {
    let n = gradients.len();
    if n <= l {
        return Err(Error::usage(format!("Newey-West needs more than {l} observations, got {n}")));
    }
    let p = gradients[0].len();
    if gradients.iter().any(|g| g.len() != p) {
        return Err(Error::usage("gradients have inconsistent lengths"));
    }
    let mut acc = DMatrix::<f64>::zeros(p, p);
    for g in gradients {
        for a in 0..p {
            for b in 0..p {
                acc[(a, b)] += g[a] * g[b];
            }
        }
    }
    for j in 1..=l {
        let w = weighting.weight(j, l);
        if w == 0.0 {
            continue;
        }
        let mut cross = DMatrix::<f64>::zeros(p, p);
        for i in j..n {
            let (gi, gj) = (&gradients[i], &gradients[i - j]);
            for a in 0..p {
                for b in 0..p {
                    cross[(a, b)] += gi[a] * gj[b];
                }
            }
        }
        acc += (&cross + cross.transpose()) * w;
    }
    acc /= n as f64;
    crate::linalg::symmetrize(&mut acc);
    Ok(acc)
}
