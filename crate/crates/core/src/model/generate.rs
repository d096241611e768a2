//! Synthetic data generators for every simulation preset.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Population design covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CovarianceSpec {
    Identity,
    /// `Σ_jk = rate^|j−k|`
    ToeplitzDecay { rate: f64 },
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CovarianceSpec::Identity => Ok(()),
            CovarianceSpec::ToeplitzDecay { rate } if rate > 0.0 && rate < 1.0 => Ok(()),
            CovarianceSpec::ToeplitzDecay { rate } => Err(Error::config(
                "covariance.rate",
                format!("Toeplitz decay rate must lie in (0, 1), got {rate}"),
            )),
        }
    }

    pub fn matrix(&self, p: usize) -> DMatrix<f64> {
        match *self {
            CovarianceSpec::Identity => DMatrix::identity(p, p),
            CovarianceSpec::ToeplitzDecay { rate } => {
                DMatrix::from_fn(p, p, |j, k| rate.powi((j as i32 - k as i32).abs()))
            }
        }
    }

    fn sampler(&self, p: usize) -> Result<GaussianSampler> {
        self.validate()?;
        match self {
            CovarianceSpec::Identity => Ok(GaussianSampler { p, chol: None }),
            _ => {
                let chol = Cholesky::new(self.matrix(p)).ok_or_else(|| {
                    Error::config("covariance", "design covariance is not positive definite")
                })?;
                Ok(GaussianSampler { p, chol: Some(chol) })
            }
        }
    }
}

/// Draws `N(0, Σ)` vectors through a Cholesky factor computed once.
struct GaussianSampler {
    p: usize,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl GaussianSampler {
    fn draw_into(&self, rng: &mut StreamRng, out: &mut Vec<f64>) {
        let z: Vec<f64> = (0..self.p).map(|_| rng.sample(StandardNormal)).collect();
        match &self.chol {
            None => out.extend_from_slice(&z),
            Some(ch) => {
                let l = ch.l_dirty();
                for j in 0..self.p {
                    let mut acc = 0.0;
                    for k in 0..=j {
                        acc += l[(j, k)] * z[k];
                    }
                    out.push(acc);
                }
            }
        }
    }
}

/// Ground truth of a synthetic linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub theta_star: Vec<f64>,
    /// Noise standard deviation.
    pub sigma: f64,
    /// Number of nonzero coefficients; 0 means dense.
    pub sparsity: usize,
}

impl SyntheticTruth {
    pub fn dense(theta_star: Vec<f64>, sigma: f64) -> Self {
        Self {
            theta_star,
            sigma,
            sparsity: 0,
        }
    }
}

/// Gaussian linear model `y = Xθ* + ε`, rows `x_i ~ N(0, Σ)`, `ε_i ~ N(0, σ²)`.
pub fn generate_linear(n: usize, cov: &CovarianceSpec, truth: &SyntheticTruth, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::usage("n must be at least 1"));
    }
    if !(truth.sigma >= 0.0) {
        return Err(Error::config("sigma", "noise level must be non-negative"));
    }
    let p = truth.theta_star.len();
    let sampler = cov.sampler(p)?;
    let mut rng = rng::stream(seed);
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        sampler.draw_into(&mut rng, &mut x);
        let eps: f64 = rng.sample(StandardNormal);
        let row = &x[i * p..(i + 1) * p];
        y.push(crate::linalg::dot(row, &truth.theta_star) + truth.sigma * eps);
    }
    Dataset::new(x, y, p)
}

/// Balanced two-class Gaussian data: `y ~ Bernoulli(½)`,
/// `x | y ~ N((2y − 1)·shift, Σ)`.
pub fn generate_logistic(n: usize, cov: &CovarianceSpec, mean_shift: &[f64], seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::usage("n must be at least 1"));
    }
    let p = mean_shift.len();
    let sampler = cov.sampler(p)?;
    let mut rng = rng::stream(seed);
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = rng.gen_bool(0.5);
        let sign = if label { 1.0 } else { -1.0 };
        sampler.draw_into(&mut rng, &mut x);
        for (v, m) in x[i * p..].iter_mut().zip(mean_shift) {
            *v += sign * m;
        }
        y.push(if label { 1.0 } else { 0.0 });
    }
    Dataset::new(x, y, p)
}

/// Population logistic coefficient of the mirrored two-class model:
/// `log-odds(x) = 2 shiftᵀ Σ⁻¹ x`, hence `θ* = 2 Σ⁻¹ shift`.
pub fn logistic_truth(cov: &CovarianceSpec, mean_shift: &[f64]) -> Result<Vec<f64>> {
    let p = mean_shift.len();
    let sigma = cov.matrix(p);
    let solved = crate::linalg::spd_solve(&sigma, mean_shift)?;
    Ok(solved.into_iter().map(|v| 2.0 * v).collect())
}

/// Moving-average MA(1) noise `ε_i = a z_i + b z_{i−1}`, `z ~ N(0, z_sigma²)`.
fn ma1_noise(n: usize, (a, b): (f64, f64), z_sigma: f64, rng: &mut StreamRng) -> Vec<f64> {
    let mut prev: f64 = z_sigma * rng.sample::<f64, _>(StandardNormal);
    (0..n)
        .map(|_| {
            let z = z_sigma * rng.sample::<f64, _>(StandardNormal);
            let e = a * z + b * prev;
            prev = z;
            e
        })
        .collect()
}

/// Time-series regression with i.i.d. `x_i ~ N(1/√p · 1, I)` and MA(1) errors.
pub fn generate_ma_timeseries(
    n: usize,
    p: usize,
    theta_star: &[f64],
    ma_coeffs: (f64, f64),
    z_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::usage("time series needs n >= 2"));
    }
    if theta_star.len() != p {
        return Err(Error::usage("theta_star length differs from p"));
    }
    let mut rng = rng::stream(seed);
    let mean = 1.0 / (p as f64).sqrt();
    let mut x = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        x.push(mean + rng.sample::<f64, _>(StandardNormal));
    }
    let eps = ma1_noise(n, ma_coeffs, z_sigma, &mut rng);
    let y = (0..n)
        .map(|i| crate::linalg::dot(&x[i * p..(i + 1) * p], theta_star) + eps[i])
        .collect();
    Dataset::new(x, y, p)
}

/// Mean-estimation data: rows `X_i = mean + ε_i`, each coordinate an
/// independent MA(1) series (`b = 0` gives i.i.d. noise). Responses are zero.
pub fn generate_mean_series(
    n: usize,
    mean: &[f64],
    ma_coeffs: (f64, f64),
    z_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || mean.is_empty() {
        return Err(Error::usage("mean series needs n >= 1 and p >= 1"));
    }
    let p = mean.len();
    let mut rng = rng::stream(seed);
    let cols: Vec<Vec<f64>> = (0..p).map(|_| ma1_noise(n, ma_coeffs, z_sigma, &mut rng)).collect();
    let mut x = Vec::with_capacity(n * p);
    for i in 0..n {
        for j in 0..p {
            x.push(mean[j] + cols[j][i]);
        }
    }
    Dataset::new(x, vec![0.0; n], p)
}

/// Sparse high-dimensional linear model: `θ*` has its first `s` entries equal
/// to `amplitude`, `x_i ~ N(0, I)`.
pub fn generate_sparse_highdim(
    n: usize,
    p: usize,
    s: usize,
    amplitude: f64,
    sigma: f64,
    seed: u64,
) -> Result<(Dataset, SyntheticTruth)> {
    if s > p {
        return Err(Error::usage(format!("sparsity {s} exceeds dimension {p}")));
    }
    let mut theta_star = vec![0.0; p];
    theta_star[..s].iter_mut().for_each(|v| *v = amplitude);
    let truth = SyntheticTruth {
        theta_star,
        sigma,
        sparsity: s,
    };
    let data = generate_linear(n, &CovarianceSpec::Identity, &truth, seed)?;
    Ok((data, truth))
}

/// Sample covariance `(1/n) Σ x_i x_iᵀ` (uncentered), used by tests and oracles.
pub fn second_moment(data: &Dataset) -> DMatrix<f64> {
    let x = data.design_matrix();
    (x.transpose() * &x) / data.n() as f64
}

/// Column means of the design.
pub fn column_means(data: &Dataset) -> DVector<f64> {
    let mut m = DVector::zeros(data.p());
    for row in data.rows() {
        for (j, v) in row.iter().enumerate() {
            m[j] += v;
        }
    }
    m / data.n() as f64
}
