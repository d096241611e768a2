//! De-biased estimator `θ̂ᵈ = θ̂ − Ŝ⁻¹ ∇̄(θ̂)` and its plug-in covariance
//! `Ŝ⁻¹ [(1/n) Σ r_i² x_i x_iᵀ] Ŝ⁻¹`.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::inference::z_test_pvalue;
use crate::linalg::{dot, norm2, norm_inf, spd_inverse, spd_solve, symmetrize};
use crate::model::{fmt_f64, Dataset};
use crate::rng::{child_stream, tag};

use super::config::{DebiasMode, HighDimConfig};
use super::prox_svrg::StepScratch;
use super::soft_threshold::SoftThresholdCov;

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedEstimate {
    pub theta_hat: Vec<f64>,
    pub theta_d: Vec<f64>,
    /// Per-coordinate variance of `θ̂ᵈ` (already divided by `n`).
    pub variance: Vec<f64>,
}

impl DebiasedEstimate {
    pub fn se(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    /// `(θ̂ᵈ_j − null_j) / se_j`.
    pub fn z_scores(&self, null: &[f64]) -> Vec<f64> {
        self.theta_d
            .iter()
            .zip(null)
            .zip(self.se())
            .map(|((t, n0), s)| {
                let diff = t - n0;
                if s > 0.0 {
                    diff / s
                } else if diff == 0.0 {
                    0.0
                } else {
                    diff.signum() * f64::INFINITY
                }
            })
            .collect()
    }

    pub fn pvalues(&self, null: &[f64]) -> Vec<f64> {
        (0..self.theta_d.len())
            .map(|j| z_test_pvalue(self.theta_d[j], null[j], self.variance[j], 1))
            .collect()
    }

    /// `coord,theta_hat,theta_d,se,z,pvalue` against the zero null.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let null = vec![0.0; self.theta_d.len()];
        let (se, z, pv) = (self.se(), self.z_scores(&null), self.pvalues(&null));
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["coord", "theta_hat", "theta_d", "se", "z", "pvalue"])?;
        for j in 0..self.theta_d.len() {
            out.write_record([
                (j + 1).to_string(),
                fmt_f64(self.theta_hat[j]),
                fmt_f64(self.theta_d[j]),
                fmt_f64(se[j]),
                fmt_f64(z[j]),
                fmt_f64(pv[j]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// `(1/n) Σ (x_iᵀθ − y_i) x_i`.
pub fn residual_gradient(data: &Dataset, theta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; data.p()];
    let inv = 1.0 / data.n() as f64;
    for (x, y) in data.rows().zip(data.y()) {
        let r = (dot(x, theta) - y) * inv;
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += r * xj;
        }
    }
    g
}

/// Relative residual `‖Ŝu + grad‖_∞ / ‖grad‖_∞` at which the SVRG de-bias
/// solve stops early.
pub const DEBIAS_TOLERANCE: f64 = 1e-12;

/// Minimize `½uᵀŜu + ⟨grad, u⟩` by feature-sampled SVRG, for at most
/// `cfg.debias_epochs` epochs.
pub fn svrg_quadratic_solve(cov: &SoftThresholdCov<'_>, grad: &[f64], cfg: &HighDimConfig) -> Vec<f64> {
    let p = cov.p();
    let eta = cfg.eta(p);
    let inner = cfg.inner_len(p);
    let mut rng = child_stream(cfg.seed, 1, tag::ALGORITHM);
    let mut scratch = StepScratch::new();
    let mut u = vec![0.0; p];
    let mut full = vec![0.0; p];
    let mut d = vec![0.0; p];
    let mut d_sum = vec![0.0; p];
    let stop = DEBIAS_TOLERANCE * norm_inf(grad);
    for _ in 0..cfg.debias_epochs {
        cov.matvec_into(&u, &mut full);
        for (f, g) in full.iter_mut().zip(grad) {
            *f += g;
        }
        if norm_inf(&full) <= stop {
            break;
        }
        for j in 0..p {
            d[j] = -eta * full[j];
            d_sum[j] = d[j];
        }
        for _ in 0..inner {
            scratch.sample(&mut rng, p, cfg.inner_batch);
            scratch.step(cov, &mut d, None, &full, eta, None);
            for (s, v) in d_sum.iter_mut().zip(&d) {
                *s += v;
            }
        }
        let c = 1.0 / (inner + 1) as f64;
        for (uj, s) in u.iter_mut().zip(&d_sum) {
            *uj += c * s;
        }
    }
    u
}

/// `θ̂ᵈ` without variances.
pub fn debias_point(
    data: &Dataset,
    theta_hat: &[f64],
    cov: &SoftThresholdCov<'_>,
    mode: DebiasMode,
    cfg: &HighDimConfig,
) -> Result<Vec<f64>> {
    if theta_hat.len() != data.p() {
        return Err(Error::usage("theta_hat dimension does not match the data"));
    }
    let grad = residual_gradient(data, theta_hat);
    let correction = match mode {
        DebiasMode::ExactDense => {
            let s = cov.to_dense(cfg.dense_limit).map_err(|_| {
                Error::config(
                    "debias_mode",
                    format!("exact_dense needs p <= dense_limit ({}), got p = {}", cfg.dense_limit, data.p()),
                )
            })?;
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            spd_solve(&s, &neg)?
        }
        DebiasMode::Svrg => svrg_quadratic_solve(cov, &grad, cfg),
    };
    let theta_d: Vec<f64> = theta_hat.iter().zip(&correction).map(|(t, c)| t + c).collect();
    if !crate::linalg::all_finite(&theta_d) {
        return Err(Error::numeric("non-finite de-biased estimate"));
    }
    Ok(theta_d)
}

/// `θ̂ᵈ` with variances from the plug-in sandwich diagonal ÷ `n`.
pub fn debiased_estimator(
    data: &Dataset,
    theta_hat: &[f64],
    cov: &SoftThresholdCov<'_>,
    mode: DebiasMode,
    cfg: &HighDimConfig,
) -> Result<DebiasedEstimate> {
    let theta_d = debias_point(data, theta_hat, cov, mode, cfg)?;
    let sandwich_mode = if data.p() <= cfg.dense_limit {
        SandwichMode::Dense
    } else {
        SandwichMode::Diagonal
    };
    let n = data.n() as f64;
    let variance = plugin_sandwich_highdim(data, theta_hat, cov, sandwich_mode, cfg.dense_limit)?
        .diagonal()
        .iter()
        .map(|v| v / n)
        .collect();
    Ok(DebiasedEstimate {
        theta_hat: theta_hat.to_vec(),
        theta_d,
        variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SandwichMode {
    /// Full matrix via a dense inverse of `Ŝ`.
    Dense,
    /// Diagonal only; one conjugate-gradient solve `Ŝw = e_j` per coordinate.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sandwich {
    Matrix(DMatrix<f64>),
    Diagonal(Vec<f64>),
}

impl Sandwich {
    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            Sandwich::Matrix(m) => m.diagonal().iter().copied().collect(),
            Sandwich::Diagonal(d) => d.clone(),
        }
    }
}

fn residuals(data: &Dataset, theta: &[f64]) -> Vec<f64> {
    data.rows().zip(data.y()).map(|(x, y)| dot(x, theta) - y).collect()
}

pub fn plugin_sandwich_highdim(
    data: &Dataset,
    theta_hat: &[f64],
    cov: &SoftThresholdCov<'_>,
    mode: SandwichMode,
    dense_limit: usize,
) -> Result<Sandwich> {
    let (n, p) = (data.n(), data.p());
    if theta_hat.len() != p {
        return Err(Error::usage("theta_hat dimension does not match the data"));
    }
    let r = residuals(data, theta_hat);
    let inv_n = 1.0 / n as f64;
    match mode {
        SandwichMode::Dense => {
            let s = cov.to_dense(dense_limit)?;
            let s_inv = spd_inverse(&s)?;
            let mut m = DMatrix::zeros(p, p);
            for (x, ri) in data.rows().zip(&r) {
                let xv = nalgebra::DVector::from_column_slice(x);
                m.ger(ri * ri * inv_n, &xv, &xv, 1.0);
            }
            let mut out = &s_inv * m * &s_inv;
            symmetrize(&mut out);
            Ok(Sandwich::Matrix(out))
        }
        SandwichMode::Diagonal => {
            let mut diag = Vec::with_capacity(p);
            let mut e = vec![0.0; p];
            for j in 0..p {
                e[j] = 1.0;
                let w = conjugate_gradient(cov, &e, 1e-10, 10 * p + 100)?;
                e[j] = 0.0;
                let v: f64 = data
                    .rows()
                    .zip(&r)
                    .map(|(x, ri)| {
                        let xw = dot(x, &w);
                        ri * ri * xw * xw
                    })
                    .sum::<f64>()
                    * inv_n;
                diag.push(v);
            }
            Ok(Sandwich::Diagonal(diag))
        }
    }
}

/// Conjugate gradients for `Ŝw = rhs`; relative residual tolerance `tol`.
pub fn conjugate_gradient(cov: &SoftThresholdCov<'_>, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let p = rhs.len();
    let mut w = vec![0.0; p];
    let mut r = rhs.to_vec();
    let mut d = r.clone();
    let mut sd = vec![0.0; p];
    let target = tol * norm2(rhs);
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(w);
    }
    for _ in 0..max_iter {
        cov.matvec_into(&d, &mut sd);
        let curv = dot(&d, &sd);
        if curv <= 0.0 {
            return Err(Error::LinearAlgebra(
                "thresholded covariance is not positive definite (conjugate gradients)".into(),
            ));
        }
        let alpha = rr / curv;
        for j in 0..p {
            w[j] += alpha * d[j];
            r[j] -= alpha * sd[j];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            return Ok(w);
        }
        let beta = rr_new / rr;
        for j in 0..p {
            d[j] = r[j] + beta * d[j];
        }
        rr = rr_new;
    }
    Err(Error::numeric(format!("conjugate gradients did not converge in {max_iter} iterations")))
}
