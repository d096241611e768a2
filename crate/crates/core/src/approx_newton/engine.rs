//! Stochastic Newton steps with SGD inner solves, and the outer loop shared
//! by the low-dimensional and time-series engines.

use rand::seq::index;
use rand::Rng;

use super::run::{Algorithm, InferenceRun, Replicate};
use super::schedule::{hvp_delta, inner_len, inner_step, outer_step};
use super::{NewtonInferConfig, StepCap};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm2};
use crate::model::{Dataset, LossModel};
use crate::rng::{self, StreamRng};

/// Output of one approximate Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    /// `ḡ = (1/(L_t+1)) Σ_{j=0}^{L_t} g^j`
    pub g_bar: Vec<f64>,
    /// `g^{L_t}`, the step applied to the iterate.
    pub g_last: Vec<f64>,
}

/// Reusable buffers for minibatch Hessian-vector products.
pub(crate) struct HvpScratch {
    step: Vec<f64>,
    out: Vec<f64>,
}

impl HvpScratch {
    pub(crate) fn new(p: usize) -> Self {
        Self {
            step: vec![0.0; p],
            out: vec![0.0; p],
        }
    }

    /// `(1/(|I|δ)) Σ_{k∈I} (∇f_k(θ + δg) − ∇f_k(θ))` into `self.out`.
    fn hvp(&mut self, loss: LossModel, data: &Dataset, batch: &[usize], theta: &[f64], g: &[f64], delta: f64) {
        for (s, v) in self.step.iter_mut().zip(g) {
            *s = delta * v;
        }
        self.out.iter_mut().for_each(|o| *o = 0.0);
        let w = 1.0 / (batch.len() as f64 * delta);
        for &k in batch {
            loss.add_gradient_difference(data, k, theta, &self.step, w, &mut self.out);
        }
    }

    /// `(1/|I|) Σ_{k∈I} (∇f_k(θ + d) − ∇f_k(θ))` into `self.out`.
    fn gradient_difference(&mut self, loss: LossModel, data: &Dataset, batch: &[usize], theta: &[f64], d: &[f64]) {
        self.out.iter_mut().for_each(|o| *o = 0.0);
        let w = 1.0 / batch.len() as f64;
        for &k in batch {
            loss.add_gradient_difference(data, k, theta, d, w, &mut self.out);
        }
    }
}

pub(crate) fn sample_inner_batch(rng: &mut StreamRng, n: usize, s: usize, out: &mut Vec<usize>) {
    out.clear();
    out.extend(index::sample(rng, n, s).into_iter());
}

/// Approximately solve `Ĥ g = g0 / ρ_t`-type Newton systems by SGD:
/// `g^{j+1} = g^j − τ_j HVP(θ_t, g^j) + τ_j g0`, starting at `g^0 = g0`.
///
/// `tau_cap` bounds every inner step (`f64::INFINITY` disables it).
#[allow(clippy::too_many_arguments)]
pub fn solve_newton_step_sgd(
    loss: LossModel,
    data: &Dataset,
    theta_t: &[f64],
    g0: &[f64],
    t: usize,
    cfg: &NewtonInferConfig,
    tau_cap: f64,
    rng: &mut StreamRng,
) -> Result<NewtonStep> {
    cfg.validate_bounds(data.n())?;
    if theta_t.len() != data.p() || g0.len() != data.p() {
        return Err(Error::usage("iterate and initial direction must have length p"));
    }
    let mut scratch = HvpScratch::new(data.p());
    let mut batch = Vec::with_capacity(cfg.inner_batch);
    let mut inner = InnerSolve::new(g0);
    let rho_t = outer_step(cfg.rho0, cfg.d_o, t);
    for j in 0..inner_len(cfg.inner_iterations, cfg.inner_growth, t) {
        sample_inner_batch(rng, data.n(), cfg.inner_batch, &mut batch);
        inner.step(loss, data, theta_t, g0, &batch, cfg, rho_t, j, tau_cap, &mut scratch);
        inner.check(t, j)?;
    }
    Ok(inner.finish())
}

/// State of the inference-track inner recursion.
struct InnerSolve {
    g: Vec<f64>,
    sum: Vec<f64>,
    count: usize,
}

impl InnerSolve {
    fn new(g0: &[f64]) -> Self {
        Self {
            g: g0.to_vec(),
            sum: g0.to_vec(),
            count: 1,
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn step(
        &mut self,
        loss: LossModel,
        data: &Dataset,
        theta: &[f64],
        g0: &[f64],
        batch: &[usize],
        cfg: &NewtonInferConfig,
        rho_t: f64,
        j: usize,
        tau_cap: f64,
        scratch: &mut HvpScratch,
    ) {
        let tau = inner_step(cfg.tau0, cfg.d_i, j).min(tau_cap);
        let delta = hvp_delta(cfg.delta0, rho_t, tau);
        scratch.hvp(loss, data, batch, theta, &self.g, delta);
        for ((g, h), a) in self.g.iter_mut().zip(&scratch.out).zip(g0) {
            *g += tau * (a - h);
        }
        for (s, g) in self.sum.iter_mut().zip(&self.g) {
            *s += g;
        }
        self.count += 1;
    }

    fn check(&self, t: usize, j: usize) -> Result<()> {
        if all_finite(&self.g) {
            Ok(())
        } else {
            Err(Error::numeric(format!(
                "non-finite inner iterate at outer step {t}, inner step {j}"
            )))
        }
    }

    fn finish(self) -> NewtonStep {
        let inv = 1.0 / self.count as f64;
        NewtonStep {
            g_bar: self.sum.iter().map(|v| v * inv).collect(),
            g_last: self.g,
        }
    }
}

/// How outer indices are drawn.
#[derive(Debug, Clone, Copy)]
pub(crate) enum OuterSampling {
    /// `S_o` indices uniformly with replacement.
    WithReplacement { batch: usize },
    /// One uniform start, then `len` consecutive indices modulo `n`.
    CircularBlock { len: usize },
}

impl OuterSampling {
    fn scale_count(&self) -> usize {
        match *self {
            OuterSampling::WithReplacement { batch } => batch,
            OuterSampling::CircularBlock { len } => len,
        }
    }

    /// Returns the block start for block sampling.
    fn draw(&self, rng: &mut StreamRng, n: usize, out: &mut Vec<usize>) -> Option<usize> {
        out.clear();
        match *self {
            OuterSampling::WithReplacement { batch } => {
                out.extend((0..batch).map(|_| rng.gen_range(0..n)));
                None
            }
            OuterSampling::CircularBlock { len } => {
                let start = rng.gen_range(0..n);
                out.extend((0..len).map(|k| (start + k) % n));
                Some(start)
            }
        }
    }
}

/// How the point estimate advances.
#[derive(Debug, Clone, Copy)]
pub(crate) enum PointTrack {
    /// `θ_{t+1} = θ_t + g^{L_t}`.
    Newton,
    /// `θ_{t+1} = θ_t + d̄_t` from SVRG inner iterations with step `eta`.
    Svrg { eta: f64 },
}

/// State of the SVRG point-track inner recursion.
pub(crate) struct SvrgTrack {
    d0: Vec<f64>,
    d: Vec<f64>,
    sum: Vec<f64>,
    count: usize,
}

impl SvrgTrack {
    /// `d^0 = −η ∇f(θ)`.
    pub(crate) fn new(loss: LossModel, data: &Dataset, theta: &[f64], eta: f64) -> Self {
        let d0: Vec<f64> = loss.full_gradient(data, theta).iter().map(|v| -eta * v).collect();
        Self {
            d: d0.clone(),
            sum: d0.clone(),
            d0,
            count: 1,
        }
    }

    /// `d ← d − η (ĝ_I(θ + d) − ĝ_I(θ)) + d^0`.
    #[inline]
    pub(crate) fn step(
        &mut self,
        loss: LossModel,
        data: &Dataset,
        theta: &[f64],
        batch: &[usize],
        eta: f64,
        scratch: &mut HvpScratch,
    ) {
        scratch.gradient_difference(loss, data, batch, theta, &self.d);
        for ((d, h), a) in self.d.iter_mut().zip(&scratch.out).zip(&self.d0) {
            *d += a - eta * h;
        }
        for (s, d) in self.sum.iter_mut().zip(&self.d) {
            *s += d;
        }
        self.count += 1;
    }

    pub(crate) fn average(&self) -> Vec<f64> {
        let inv = 1.0 / self.count as f64;
        self.sum.iter().map(|v| v * inv).collect()
    }

    pub(crate) fn current(&self) -> &[f64] {
        &self.d
    }
}

/// Largest eigenvalue of the full-data Hessian at `theta`, by power iteration
/// on finite-difference Hessian-vector products (gradients only).
pub fn estimate_max_curvature(loss: LossModel, data: &Dataset, theta: &[f64]) -> Result<f64> {
    const ITERATIONS: usize = 200;
    const DELTA: f64 = 1e-6;
    let p = data.p();
    let all: Vec<usize> = (0..data.n()).collect();
    let mut scratch = HvpScratch::new(p);
    // A start vector with no special symmetry, so it is not orthogonal to
    // the leading eigenvector of structured Hessians.
    let mut v: Vec<f64> = (0..p).map(|k| 1.0 + (k as f64 + 1.0).sqrt().fract()).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..ITERATIONS {
        scratch.hvp(loss, data, &all, theta, &v, DELTA);
        let norm = norm2(&scratch.out);
        if !norm.is_finite() {
            return Err(Error::numeric("non-finite curvature estimate"));
        }
        if norm == 0.0 {
            return Ok(0.0);
        }
        let converged = (norm - lambda).abs() <= 1e-9 * norm;
        lambda = norm;
        v.iter_mut().zip(&scratch.out).for_each(|(x, h)| *x = h / norm);
        if converged {
            break;
        }
    }
    Ok(lambda)
}

/// Resolve the configured inner step cap at the starting point.
pub fn resolve_step_cap(loss: LossModel, data: &Dataset, theta0: &[f64], cap: StepCap) -> Result<f64> {
    match cap {
        StepCap::Off => Ok(f64::INFINITY),
        StepCap::Fixed(c) => Ok(c),
        StepCap::InverseCurvature => {
            let lambda = estimate_max_curvature(loss, data, theta0)?;
            Ok(if lambda > 0.0 { 1.0 / lambda } else { f64::INFINITY })
        }
    }
}

/// Shared outer loop of the low-dimensional and time-series engines.
pub(crate) fn run_engine(
    loss: LossModel,
    data: &Dataset,
    theta0: &[f64],
    cfg: &NewtonInferConfig,
    sampling: OuterSampling,
    track: PointTrack,
    algorithm: Algorithm,
) -> Result<InferenceRun> {
    cfg.validate_bounds(data.n())?;
    loss.validate(data)?;
    if theta0.len() != data.p() {
        return Err(Error::usage(format!(
            "starting point has length {}, expected p = {}",
            theta0.len(),
            data.p()
        )));
    }
    if let OuterSampling::CircularBlock { len } = sampling {
        if len == 0 || len > data.n() {
            return Err(Error::usage(format!("block length {len} must lie in [1, n = {}]", data.n())));
        }
    }
    if let PointTrack::Svrg { eta } = track {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::config("eta", format!("SVRG step must be positive, got {eta}")));
        }
    }
    let n = data.n();
    let p = data.p();
    let tau_cap = resolve_step_cap(loss, data, theta0, cfg.step_cap)?;
    let mut outer_rng = rng::child_stream(cfg.seed, 0, rng::tag::OUTER);
    let mut inner_rng = rng::child_stream(cfg.seed, 0, rng::tag::INNER);
    let guard = 1e6 * (1.0 + norm2(theta0));

    let mut theta = theta0.to_vec();
    let mut trace = Vec::with_capacity(cfg.outer_iterations + 1);
    trace.push(theta.clone());
    let mut replicates = Vec::with_capacity(cfg.outer_iterations);
    let mut outer_idx = Vec::new();
    let mut batch = Vec::with_capacity(cfg.inner_batch);
    let mut scratch = HvpScratch::new(p);
    let mut svrg_scratch = HvpScratch::new(p);

    for t in 0..cfg.outer_iterations {
        let rho_t = outer_step(cfg.rho0, cfg.d_o, t);
        let block_start = sampling.draw(&mut outer_rng, n, &mut outer_idx);
        let avg_grad = loss.minibatch_gradient(data, &outer_idx, &theta)?;
        let g0: Vec<f64> = avg_grad.iter().map(|v| -rho_t * v).collect();

        let mut inner = InnerSolve::new(&g0);
        let mut svrg = match track {
            PointTrack::Svrg { eta } => Some((SvrgTrack::new(loss, data, &theta, eta), eta)),
            PointTrack::Newton => None,
        };
        for j in 0..inner_len(cfg.inner_iterations, cfg.inner_growth, t) {
            sample_inner_batch(&mut inner_rng, n, cfg.inner_batch, &mut batch);
            inner.step(loss, data, &theta, &g0, &batch, cfg, rho_t, j, tau_cap, &mut scratch);
            inner.check(t, j)?;
            if let Some((track, eta)) = svrg.as_mut() {
                track.step(loss, data, &theta, &batch, *eta, &mut svrg_scratch);
                if !all_finite(track.current()) {
                    return Err(Error::numeric(format!(
                        "non-finite SVRG iterate at outer step {t}, inner step {j}"
                    )));
                }
            }
        }
        let step = inner.finish();
        let delta = match &svrg {
            Some((track, _)) => track.average(),
            None => step.g_last,
        };
        for (th, d) in theta.iter_mut().zip(&delta) {
            *th += d;
        }
        replicates.push(Replicate::new(t, step.g_bar, rho_t, sampling.scale_count(), block_start));
        let drift = norm2(&crate::linalg::sub(&theta, theta0));
        if !(drift <= guard) {
            return Err(Error::Divergence(format!(
                "iterate left the trust region at outer step {t}: ‖θ_t − θ_0‖ = {drift:.3e} > {guard:.3e}"
            )));
        }
        trace.push(theta.clone());
    }
    Ok(InferenceRun::new(algorithm, trace, replicates, sampling.scale_count(), cfg.clone()))
}

/// Stochastic Newton inference with SGD inner solves: at each outer step draw
/// `S_o` indices with replacement, solve the Newton system approximately,
/// record the replicate `√S_o ḡ_t / ρ_t`, and move `θ_{t+1} = θ_t + g^{L_t}`.
pub fn run_inference(loss: LossModel, data: &Dataset, theta0: &[f64], cfg: &NewtonInferConfig) -> Result<InferenceRun> {
    run_engine(
        loss,
        data,
        theta0,
        cfg,
        OuterSampling::WithReplacement { batch: cfg.outer_batch },
        PointTrack::Newton,
        Algorithm::Sgd,
    )
}
