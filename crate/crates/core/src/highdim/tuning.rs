//! Data-driven `λ` and `ω`: a cross-validated plain LASSO pre-pass for the
//! noise level and signal size, then rate-scaled defaults.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm1, sym_eigenvalues};
use crate::model::{second_moment, Dataset};
use crate::rng::{child_stream, tag};

use super::config::HighDimConfig;
use super::soft_threshold::{shrink, shrink_matrix};

/// Grid of `c_ω` values searched for the best-conditioned `Ŝ`.
const OMEGA_GRID: std::ops::RangeInclusive<u32> = 1..=30;
const OMEGA_GRID_STEP: f64 = 0.1;
const PATH_LEN: usize = 40;
const CD_TOL: f64 = 1e-8;
/// Early exit from the CV path: this many consecutive penalties whose error
/// exceeds the running minimum by the margin.
const PATH_STOP_PATIENCE: usize = 5;
const PATH_STOP_MARGIN: f64 = 0.02;
const CD_MAX_SWEEPS: usize = 10_000;

/// Column-major copy of a design for coordinate descent.
struct Columns {
    n: usize,
    p: usize,
    x: Vec<f64>,
    /// `‖x_j‖² / n`
    sq: Vec<f64>,
}

impl Columns {
    fn new(data: &Dataset, rows: &[usize]) -> Self {
        let (n, p) = (rows.len(), data.p());
        let mut x = vec![0.0; n * p];
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in data.row(i).iter().enumerate() {
                x[j * n + r] = *v;
            }
        }
        let sq = (0..p).map(|j| x[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>() / n as f64).collect();
        Self { n, p, x, sq }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }
}

/// One coordinate update; returns the (scaled) change.
fn cd_update(cols: &Columns, j: usize, lambda: f64, theta: &mut [f64], resid: &mut [f64]) -> f64 {
    let sq = cols.sq[j];
    if sq == 0.0 {
        return 0.0;
    }
    let xj = cols.col(j);
    let rho = crate::linalg::dot(xj, resid) / cols.n as f64 + sq * theta[j];
    let new = shrink(rho, lambda) / sq;
    let delta = new - theta[j];
    if delta != 0.0 {
        for (r, x) in resid.iter_mut().zip(xj) {
            *r -= delta * x;
        }
        theta[j] = new;
    }
    delta.abs() * sq.sqrt()
}

/// Coordinate descent for `(1/2n)‖y − Xθ‖² + λ‖θ‖₁`, warm-started from
/// `theta` with `resid = y − Xθ` kept in sync.
fn lasso_cd(cols: &Columns, lambda: f64, theta: &mut [f64], resid: &mut [f64]) -> Result<()> {
    let mut sweeps = 0;
    loop {
        let mut change = 0.0f64;
        for j in 0..cols.p {
            change = change.max(cd_update(cols, j, lambda, theta, resid));
        }
        sweeps += 1;
        if change < CD_TOL {
            return Ok(());
        }
        let active: Vec<usize> = (0..cols.p).filter(|&j| theta[j] != 0.0).collect();
        loop {
            let mut c = 0.0f64;
            for &j in &active {
                c = c.max(cd_update(cols, j, lambda, theta, resid));
            }
            sweeps += 1;
            if c < CD_TOL {
                break;
            }
            if sweeps > CD_MAX_SWEEPS {
                return Err(Error::numeric("LASSO coordinate descent did not converge"));
            }
        }
        if sweeps > CD_MAX_SWEEPS {
            return Err(Error::numeric("LASSO coordinate descent did not converge"));
        }
    }
}

/// Plain LASSO at one penalty, from zero.
pub fn lasso(data: &Dataset, lambda: f64) -> Result<Vec<f64>> {
    let rows: Vec<usize> = (0..data.n()).collect();
    let cols = Columns::new(data, &rows);
    let mut theta = vec![0.0; data.p()];
    let mut resid = data.y().to_vec();
    lasso_cd(&cols, lambda, &mut theta, &mut resid)?;
    Ok(theta)
}

fn lambda_grid(data: &Dataset) -> Vec<f64> {
    let n = data.n() as f64;
    let mut xty = vec![0.0; data.p()];
    for (x, y) in data.rows().zip(data.y()) {
        for (a, v) in xty.iter_mut().zip(x) {
            *a += y * v;
        }
    }
    let max = xty.iter().fold(0.0f64, |m, v| m.max(v.abs())) / n;
    if max == 0.0 {
        return vec![0.0];
    }
    let ratio: f64 = if data.n() <= data.p() { 5e-2 } else { 1e-3 };
    (0..PATH_LEN)
        .map(|k| max * ratio.powf(k as f64 / (PATH_LEN - 1) as f64))
        .collect()
}

/// Result of the cross-validated pre-pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvLasso {
    pub lambda: f64,
    pub theta: Vec<f64>,
    /// Root mean squared residual of the refit.
    pub sigma_hat: f64,
    /// `‖θ‖₁` of the refit.
    pub l1_hat: f64,
    pub lambdas: Vec<f64>,
    pub cv_error: Vec<f64>,
}

/// K-fold cross-validated plain LASSO along a log-spaced penalty path.
pub fn cv_lasso(data: &Dataset, folds: usize, seed: u64) -> Result<CvLasso> {
    let n = data.n();
    if folds < 2 || folds > n {
        return Err(Error::usage(format!("cannot split {n} samples into {folds} folds")));
    }
    let lambdas = lambda_grid(data);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut child_stream(seed, 0, tag::CROSS_VALIDATION));
    struct Fold {
        cols: Columns,
        theta: Vec<f64>,
        resid: Vec<f64>,
        test: Vec<usize>,
    }
    let mut state: Vec<Fold> = (0..folds)
        .map(|f| {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (pos, &i) in order.iter().enumerate() {
                if pos % folds == f {
                    test.push(i)
                } else {
                    train.push(i)
                }
            }
            Fold {
                cols: Columns::new(data, &train),
                theta: vec![0.0; data.p()],
                resid: train.iter().map(|&i| data.y()[i]).collect(),
                test,
            }
        })
        .collect();
    // Walk down the path; stop once the error has clearly passed its minimum.
    let mut cv_error = Vec::with_capacity(lambdas.len());
    let mut rising = 0;
    for &lambda in &lambdas {
        let mut err = 0.0;
        for fold in state.iter_mut() {
            lasso_cd(&fold.cols, lambda, &mut fold.theta, &mut fold.resid)?;
            err += fold
                .test
                .iter()
                .map(|&i| (data.y()[i] - crate::linalg::dot(data.row(i), &fold.theta)).powi(2))
                .sum::<f64>()
                / n as f64;
        }
        let min = cv_error.iter().copied().fold(f64::INFINITY, f64::min);
        cv_error.push(err);
        if err > min * (1.0 + PATH_STOP_MARGIN) {
            rising += 1;
            if rising >= PATH_STOP_PATIENCE {
                break;
            }
        } else {
            rising = 0;
        }
    }
    let lambdas: Vec<f64> = lambdas[..cv_error.len()].to_vec();
    let best = cv_error
        .iter()
        .enumerate()
        .fold(0, |b, (k, e)| if *e < cv_error[b] { k } else { b });
    let rows: Vec<usize> = (0..n).collect();
    let cols = Columns::new(data, &rows);
    let mut theta = vec![0.0; data.p()];
    let mut resid = data.y().to_vec();
    for &lambda in &lambdas[..=best] {
        lasso_cd(&cols, lambda, &mut theta, &mut resid)?;
    }
    let sigma_hat = (resid.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    Ok(CvLasso {
        lambda: lambdas[best],
        l1_hat: norm1(&theta),
        theta,
        sigma_hat,
        lambdas,
        cv_error,
    })
}

/// Resolved penalty and threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda: f64,
    pub omega: f64,
    pub c_omega: f64,
    pub sigma_hat: Option<f64>,
    pub l1_hat: Option<f64>,
}

/// `√(ln p / n)`.
pub fn rate(data: &Dataset) -> f64 {
    rate_for(data.n() as f64, data.p() as f64)
}

pub fn rate_for(n: f64, p: f64) -> f64 {
    (p.ln() / n).sqrt()
}

/// `(c_λ (σ̂ + l1̂) r, c_ω r)` with `r = √(ln p / n)`.
pub fn penalty_formula(n: f64, p: f64, sigma_hat: f64, l1_hat: f64, c_lambda: f64, c_omega: f64) -> (f64, f64) {
    let r = rate_for(n, p);
    (c_lambda * (sigma_hat + l1_hat) * r, c_omega * r)
}

/// `c_ω` minimizing the condition number of `Shrink_{c·rate}(C)` over a
/// grid, among positive definite candidates.
pub fn best_conditioned_c_omega(data: &Dataset) -> Option<f64> {
    let c = second_moment(data);
    let r = rate(data);
    let mut best: Option<(f64, f64)> = None;
    for k in OMEGA_GRID {
        let cw = k as f64 * OMEGA_GRID_STEP;
        let ev = sym_eigenvalues(&shrink_matrix(&c, cw * r));
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo <= 0.0 {
            continue;
        }
        let cond = hi / lo;
        if best.map_or(true, |(_, b)| cond < b) {
            best = Some((cw, cond));
        }
    }
    best.map(|(cw, _)| cw)
}

/// `λ = c_λ (σ̂ + ‖θ̂‖₁) √(ln p/n)`, `ω = c_ω √(ln p/n)`.
pub fn default_hyperparams(data: &Dataset, sigma_hat: f64, l1_hat: f64, cfg: &HighDimConfig) -> Result<Hyperparams> {
    if data.n() < 2 {
        return Err(Error::usage("need at least 2 samples"));
    }
    if !(sigma_hat >= 0.0 && l1_hat >= 0.0) {
        return Err(Error::usage("sigma_hat and l1_hat must be non-negative"));
    }
    let c_omega = match cfg.c_omega {
        Some(c) => c,
        None if data.p() <= cfg.dense_limit => best_conditioned_c_omega(data).unwrap_or_else(|| {
            log::warn!("no positive definite threshold on the c_omega grid; using c_omega = 1");
            1.0
        }),
        None => 1.0,
    };
    let (lambda, omega) = penalty_formula(data.n() as f64, data.p() as f64, sigma_hat, l1_hat, cfg.c_lambda, c_omega);
    Ok(Hyperparams {
        lambda,
        omega,
        c_omega,
        sigma_hat: Some(sigma_hat),
        l1_hat: Some(l1_hat),
    })
}

/// Explicit values from the config, otherwise defaults from a CV pre-pass.
pub fn resolve_hyperparams(data: &Dataset, cfg: &HighDimConfig) -> Result<Hyperparams> {
    if let (Some(lambda), Some(omega)) = (cfg.lambda, cfg.omega) {
        return Ok(Hyperparams {
            lambda,
            omega,
            c_omega: omega / rate(data),
            sigma_hat: None,
            l1_hat: None,
        });
    }
    let cv = cv_lasso(data, cfg.cv_folds, cfg.seed)?;
    log::info!(
        "cross-validated LASSO: lambda {:.4e}, sigma_hat {:.4}, l1_hat {:.4}",
        cv.lambda,
        cv.sigma_hat,
        cv.l1_hat
    );
    let mut h = default_hyperparams(data, cv.sigma_hat, cv.l1_hat, cfg)?;
    if let Some(l) = cfg.lambda {
        h.lambda = l;
    }
    if let Some(w) = cfg.omega {
        h.omega = w;
        h.c_omega = w / rate(data);
    }
    Ok(h)
}
