//! Dense reference solver for the empirical risk minimizer.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{norm2, spd_solve};
use crate::model::{Dataset, LossModel};

use super::covariance::DENSE_PLUGIN_LIMIT;

pub const GRADIENT_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100;

/// Minimizer of `(1/n) Σ f_i(θ)` by dense Newton iterations (a single solve
/// for quadratic losses), to gradient norm ≤ 1e−10.
pub fn exact_solver(loss: LossModel, data: &Dataset, theta0: &[f64]) -> Result<Vec<f64>> {
    let p = data.p();
    if p > DENSE_PLUGIN_LIMIT {
        return Err(Error::usage(format!("dense solver supports p <= {DENSE_PLUGIN_LIMIT}, got {p}")));
    }
    if theta0.len() != p {
        return Err(Error::usage("starting point length differs from p"));
    }
    loss.validate(data)?;
    let mut theta = theta0.to_vec();
    let mut grad = loss.full_gradient(data, &theta);
    let mut obj = loss.objective(data, &theta);
    for it in 0..MAX_ITERATIONS {
        if loss == LossModel::Logistic && it > 0 && separates(data, &theta) {
            return Err(Error::numeric(
                "logistic coefficients diverge: the current iterate separates the classes, so no finite minimizer exists",
            ));
        }
        let gnorm = norm2(&grad);
        if gnorm <= GRADIENT_TOLERANCE {
            return Ok(theta);
        }
        if !gnorm.is_finite() {
            return Err(Error::numeric(format!("non-finite gradient at Newton iteration {it}")));
        }
        let h = loss.hessian(data, &theta);
        let step = spd_solve(&h, &grad).map_err(|e| match e {
            Error::LinearAlgebra(m) => Error::numeric(format!("Newton iteration {it}: {m}")),
            other => other,
        })?;
        // Backtracking keeps the logistic iterations monotone; quadratics
        // accept the full step immediately.
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, d)| t - s * d).collect();
            let cand_obj = loss.objective(data, &cand);
            if cand_obj <= obj + 1e-4 * s * crate::linalg::dot(&grad, &step).min(0.0) || cand_obj <= obj {
                theta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        grad = loss.full_gradient(data, &theta);
        if !accepted {
            if norm2(&grad) <= GRADIENT_TOLERANCE {
                return Ok(theta);
            }
            return Err(Error::numeric(format!("line search failed at Newton iteration {it}")));
        }
        if norm2(&theta) > 1e12 {
            return Err(Error::numeric("Newton iterates diverge (separable data?)"));
        }
    }
    if norm2(&grad) <= GRADIENT_TOLERANCE {
        return Ok(theta);
    }
    Err(Error::numeric(format!(
        "Newton solver did not converge in {MAX_ITERATIONS} iterations (gradient norm {:.3e})",
        norm2(&grad)
    )))
}

/// `θ` classifies every sample correctly with a strictly positive margin.
fn separates(data: &Dataset, theta: &[f64]) -> bool {
    data.rows()
        .zip(data.y())
        .all(|(x, &y)| (2.0 * y - 1.0) * crate::linalg::dot(x, theta) > 0.0)
}

/// Least-squares solution by the normal equations, used as an independent check.
pub fn normal_equations(data: &Dataset) -> Result<Vec<f64>> {
    let x = data.design_matrix();
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * DVector::from_column_slice(data.y());
    spd_solve(&xtx, xty.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_linear, generate_logistic, CovarianceSpec, SyntheticTruth};

    #[test]
    fn squared_matches_normal_equations() {
        let truth = SyntheticTruth::dense(vec![1.0, -0.5, 0.25, 2.0], 0.7);
        let data = generate_linear(100, &CovarianceSpec::ToeplitzDecay { rate: 0.4 }, &truth, 3).unwrap();
        let a = exact_solver(LossModel::SquaredLinear, &data, &[0.0; 4]).unwrap();
        let b = normal_equations(&data).unwrap();
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() < 1e-10);
        }
        assert!(norm2(&LossModel::SquaredLinear.full_gradient(&data, &a)) <= GRADIENT_TOLERANCE);
    }

    #[test]
    fn logistic_converges_to_stationary_point() {
        let data = generate_logistic(500, &CovarianceSpec::Identity, &[0.3, -0.2, 0.1], 4).unwrap();
        let th = exact_solver(LossModel::Logistic, &data, &[0.0; 3]).unwrap();
        assert!(norm2(&LossModel::Logistic.full_gradient(&data, &th)) <= GRADIENT_TOLERANCE);
    }

    #[test]
    fn separable_logistic_fails() {
        let data = Dataset::from_rows(
            &[vec![1.0], vec![2.0], vec![0.5], vec![-1.0], vec![-0.3], vec![-2.0]],
            vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let err = exact_solver(LossModel::Logistic, &data, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
    }
}
