//! Small dense helpers on slices plus thin wrappers over `nalgebra` for the
//! oracles (solves, symmetric eigenvalues, operator norms).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|v| v * s).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Largest absolute eigenvalue of a symmetric matrix (its spectral norm).
pub fn sym_operator_norm(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Spectral norm of an arbitrary matrix via its largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |a, v| a.max(*v))
}

/// Sorted (ascending) eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Relative pivot below which a Cholesky factor is treated as singular.
const CHOLESKY_PIVOT_TOL: f64 = 1e-13;

fn cholesky_checked(m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(ch) = m.clone().cholesky() {
        let l = ch.l_dirty();
        let min_pivot = (0..m.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot > CHOLESKY_PIVOT_TOL * scale {
            return Ok(ch);
        }
    }
    let min = sym_eigenvalues(m).first().copied().unwrap_or(f64::NAN);
    Err(Error::LinearAlgebra(format!(
        "matrix is not positive definite (smallest eigenvalue {min:.3e})"
    )))
}

/// Inverse of a symmetric positive definite matrix, reporting the smallest
/// eigenvalue when the matrix is not safely invertible.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cholesky_checked(m)?.inverse())
}

/// Solve `m x = b` for symmetric positive definite `m`.
pub fn spd_solve(m: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let ch = cholesky_checked(m)?;
    Ok(ch.solve(&DVector::from_column_slice(b)).iter().copied().collect())
}

/// Symmetrize in place: `m <- (m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for k in (j + 1)..p {
            let v = 0.5 * (m[(j, k)] + m[(k, j)]);
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
}
