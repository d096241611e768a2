//! The strongly convex LASSO surrogate
//! `½θᵀ(Ŝ − C)θ + (1/2n)‖Xθ − y‖² + λ‖θ‖₁`.

use crate::linalg::{dot, norm1};
use crate::model::Dataset;

use super::soft_threshold::{shrink, SoftThresholdCov};

/// `(1/n) Σ y_i x_i`.
pub fn response_correlation(data: &Dataset) -> Vec<f64> {
    let mut b = vec![0.0; data.p()];
    let inv = 1.0 / data.n() as f64;
    for (x, y) in data.rows().zip(data.y()) {
        let a = y * inv;
        for (bj, xj) in b.iter_mut().zip(x) {
            *bj += a * xj;
        }
    }
    b
}

/// Smooth part of the objective, without forming `C`.
pub fn smooth_objective(data: &Dataset, theta: &[f64], cov: &SoftThresholdCov<'_>) -> f64 {
    let n = data.n() as f64;
    let s_theta = cov.matvec(theta);
    let mut quad_c = 0.0;
    let mut resid = 0.0;
    for (x, y) in data.rows().zip(data.y()) {
        let xt = dot(x, theta);
        quad_c += xt * xt;
        resid += (xt - y) * (xt - y);
    }
    0.5 * dot(theta, &s_theta) - 0.5 * quad_c / n + 0.5 * resid / n
}

pub fn modified_lasso_objective(data: &Dataset, theta: &[f64], cov: &SoftThresholdCov<'_>, lambda: f64) -> f64 {
    smooth_objective(data, theta, cov) + lambda * norm1(theta)
}

/// Gradient of the smooth part, `Ŝθ − (1/n) Σ y_i x_i`.
pub fn smooth_gradient(theta: &[f64], cov: &SoftThresholdCov<'_>, b: &[f64]) -> Vec<f64> {
    let mut g = cov.matvec(theta);
    for (gj, bj) in g.iter_mut().zip(b) {
        *gj -= bj;
    }
    g
}

/// Coordinates at most this far from zero count as zero in [`kkt_violation`];
/// averaged iterates only approach exact zeros geometrically.
pub const KKT_ZERO_TOL: f64 = 1e-10;

/// Largest violation of the optimality conditions
/// `−(Ŝθ − b)_j ∈ λ ∂|θ_j|`.
pub fn kkt_violation(theta: &[f64], cov: &SoftThresholdCov<'_>, b: &[f64], lambda: f64) -> f64 {
    let g = smooth_gradient(theta, cov, b);
    theta
        .iter()
        .zip(&g)
        .map(|(t, gj)| {
            if t.abs() <= KKT_ZERO_TOL {
                (gj.abs() - lambda).max(0.0)
            } else if *t > 0.0 {
                (gj + lambda).abs()
            } else {
                (gj - lambda).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Proximal map of `κ‖·‖₁`.
pub fn prox_l1(v: &mut [f64], kappa: f64) {
    for x in v.iter_mut() {
        *x = shrink(*x, kappa);
    }
}
