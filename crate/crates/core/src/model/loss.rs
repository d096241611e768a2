use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot};

/// Per-sample loss family.
///
/// * `SquaredLinear`: `f_i(θ) = ½ (x_iᵀθ − y_i)²`
/// * `Logistic`: `f_i(θ) = log(1 + exp(x_iᵀθ)) − y_i x_iᵀθ`
/// * `MeanEstimation`: `f_i(θ) = ½ ‖θ − x_i‖²` (responses ignored); identity Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModel {
    SquaredLinear,
    Logistic,
    MeanEstimation,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `sigmoid(a + b) − sigmoid(a)` without subtracting two nearby numbers.
#[inline]
fn sigmoid_increment(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        sigmoid(a + b) * sigmoid(-a) * (-(-b).exp_m1())
    } else {
        -(sigmoid(a) * sigmoid(-(a + b)) * (-b.exp_m1()))
    }
}

impl LossModel {
    pub fn name(&self) -> &'static str {
        match self {
            LossModel::SquaredLinear => "squared_linear",
            LossModel::Logistic => "logistic",
            LossModel::MeanEstimation => "mean_estimation",
        }
    }

    /// Check data invariants that depend on the loss family.
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        match self {
            LossModel::Logistic => data.check_binary_labels(),
            _ => Ok(()),
        }
    }

    pub fn value(&self, data: &Dataset, i: usize, theta: &[f64]) -> f64 {
        let x = data.row(i);
        match self {
            LossModel::SquaredLinear => {
                let r = dot(x, theta) - data.y()[i];
                0.5 * r * r
            }
            LossModel::Logistic => {
                let a = dot(x, theta);
                softplus(a) - data.y()[i] * a
            }
            LossModel::MeanEstimation => {
                0.5 * x.iter().zip(theta).map(|(xi, t)| (t - xi) * (t - xi)).sum::<f64>()
            }
        }
    }

    /// Empirical risk `(1/n) Σ f_i(θ)`.
    pub fn objective(&self, data: &Dataset, theta: &[f64]) -> f64 {
        (0..data.n()).map(|i| self.value(data, i, theta)).sum::<f64>() / data.n() as f64
    }

    /// `out += scale * ∇f_i(θ)`.
    #[inline]
    pub fn add_gradient(&self, data: &Dataset, i: usize, theta: &[f64], scale: f64, out: &mut [f64]) {
        let x = data.row(i);
        match self {
            LossModel::SquaredLinear => {
                let c = scale * (dot(x, theta) - data.y()[i]);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += c * xi;
                }
            }
            LossModel::Logistic => {
                let c = scale * (sigmoid(dot(x, theta)) - data.y()[i]);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += c * xi;
                }
            }
            LossModel::MeanEstimation => {
                for ((o, xi), t) in out.iter_mut().zip(x).zip(theta) {
                    *o += scale * (t - xi);
                }
            }
        }
    }

    /// `out += scale * (∇f_i(θ + step) − ∇f_i(θ))`, evaluated in a form that
    /// avoids cancellation between the two gradients.
    #[inline]
    pub fn add_gradient_difference(
        &self,
        data: &Dataset,
        i: usize,
        theta: &[f64],
        step: &[f64],
        scale: f64,
        out: &mut [f64],
    ) {
        let x = data.row(i);
        match self {
            LossModel::SquaredLinear => {
                let c = scale * dot(x, step);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += c * xi;
                }
            }
            LossModel::Logistic => {
                let c = scale * sigmoid_increment(dot(x, theta), dot(x, step));
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += c * xi;
                }
            }
            LossModel::MeanEstimation => {
                for (o, s) in out.iter_mut().zip(step) {
                    *o += scale * s;
                }
            }
        }
    }

    fn check_index(data: &Dataset, i: usize) -> Result<()> {
        if i >= data.n() {
            return Err(Error::usage(format!("sample index {i} out of range (n = {})", data.n())));
        }
        Ok(())
    }

    fn check_theta(data: &Dataset, theta: &[f64]) -> Result<()> {
        if theta.len() != data.p() {
            return Err(Error::usage(format!(
                "parameter has length {}, expected p = {}",
                theta.len(),
                data.p()
            )));
        }
        Ok(())
    }

    fn check_indices(data: &Dataset, indices: &[usize]) -> Result<()> {
        if indices.is_empty() {
            return Err(Error::usage("minibatch index list is empty"));
        }
        indices.iter().try_for_each(|&i| Self::check_index(data, i))
    }

    /// `∇f_i(θ)`.
    pub fn per_sample_gradient(&self, data: &Dataset, i: usize, theta: &[f64]) -> Result<Vec<f64>> {
        Self::check_index(data, i)?;
        Self::check_theta(data, theta)?;
        let mut g = vec![0.0; data.p()];
        self.add_gradient(data, i, theta, 1.0, &mut g);
        if !all_finite(&g) {
            return Err(Error::numeric(format!("non-finite gradient for sample {i}")));
        }
        Ok(g)
    }

    /// Mean of `∇f_i(θ)` over `indices` (duplicates count with multiplicity).
    pub fn minibatch_gradient(&self, data: &Dataset, indices: &[usize], theta: &[f64]) -> Result<Vec<f64>> {
        Self::check_indices(data, indices)?;
        Self::check_theta(data, theta)?;
        let mut g = vec![0.0; data.p()];
        let w = 1.0 / indices.len() as f64;
        for &i in indices {
            self.add_gradient(data, i, theta, w, &mut g);
        }
        if !all_finite(&g) {
            let bad = indices
                .iter()
                .copied()
                .find(|&i| self.per_sample_gradient(data, i, theta).is_err())
                .unwrap_or(indices[0]);
            return Err(Error::numeric(format!("non-finite gradient for sample {bad}")));
        }
        Ok(g)
    }

    /// Full-data gradient `(1/n) Σ ∇f_i(θ)`.
    pub fn full_gradient(&self, data: &Dataset, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; data.p()];
        let w = 1.0 / data.n() as f64;
        for i in 0..data.n() {
            self.add_gradient(data, i, theta, w, &mut g);
        }
        g
    }

    /// Forward-difference Hessian-vector product over a minibatch:
    /// `(ĝ(θ + δg) − ĝ(θ)) / δ` with `ĝ` the minibatch gradient.
    ///
    /// For quadratic losses the result is the exact minibatch Hessian times
    /// `g` for every `δ`.
    pub fn hvp_finite_difference(
        &self,
        data: &Dataset,
        indices: &[usize],
        theta: &[f64],
        g: &[f64],
        delta: f64,
    ) -> Result<Vec<f64>> {
        if !(delta > 0.0) {
            return Err(Error::usage(format!("finite-difference step must be positive, got {delta}")));
        }
        Self::check_indices(data, indices)?;
        Self::check_theta(data, theta)?;
        if g.len() != data.p() {
            return Err(Error::usage("direction length differs from p"));
        }
        let step: Vec<f64> = g.iter().map(|v| delta * v).collect();
        if theta.iter().zip(&step).any(|(t, s)| !(t + s).is_finite()) {
            return Err(Error::numeric("overflow forming θ + δg"));
        }
        let mut out = vec![0.0; data.p()];
        let w = 1.0 / (indices.len() as f64 * delta);
        for &i in indices {
            self.add_gradient_difference(data, i, theta, &step, w, &mut out);
        }
        if !all_finite(&out) {
            return Err(Error::numeric("non-finite Hessian-vector product"));
        }
        Ok(out)
    }

    /// Analytic per-sample Hessian `∇²f_i(θ)`.
    pub fn sample_hessian(&self, data: &Dataset, i: usize, theta: &[f64]) -> DMatrix<f64> {
        let p = data.p();
        let x = data.row(i);
        let w = match self {
            LossModel::SquaredLinear => 1.0,
            LossModel::Logistic => {
                let s = sigmoid(dot(x, theta));
                s * (1.0 - s)
            }
            LossModel::MeanEstimation => return DMatrix::identity(p, p),
        };
        DMatrix::from_fn(p, p, |j, k| w * x[j] * x[k])
    }

    /// Analytic full-data Hessian `(1/n) Σ ∇²f_i(θ)`.
    pub fn hessian(&self, data: &Dataset, theta: &[f64]) -> DMatrix<f64> {
        let p = data.p();
        if *self == LossModel::MeanEstimation {
            return DMatrix::identity(p, p);
        }
        let mut h = DMatrix::zeros(p, p);
        for x in data.rows() {
            let w = match self {
                LossModel::SquaredLinear => 1.0,
                _ => {
                    let s = sigmoid(dot(x, theta));
                    s * (1.0 - s)
                }
            };
            for j in 0..p {
                let wj = w * x[j];
                for k in 0..p {
                    h[(j, k)] += wj * x[k];
                }
            }
        }
        h / data.n() as f64
    }

    /// Upper bound `β_i` on the per-sample Hessian spectral norm.
    ///
    /// For the logistic loss the squared-loss bound `‖x_i‖²` is used
    /// (four times the sharp value) as a conservative choice.
    pub fn curvature_bound(&self, data: &Dataset, i: usize) -> f64 {
        match self {
            LossModel::SquaredLinear | LossModel::Logistic => {
                let x = data.row(i);
                dot(x, x)
            }
            LossModel::MeanEstimation => 1.0,
        }
    }

    pub fn max_curvature_bound(&self, data: &Dataset) -> f64 {
        (0..data.n())
            .map(|i| self.curvature_bound(data, i))
            .fold(0.0_f64, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> Dataset {
        Dataset::from_rows(
            &[vec![1.0, 0.0], vec![0.5, -1.5], vec![2.0, 1.0]],
            vec![2.0, 1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn squared_gradient_zero_residual() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0]], vec![2.0]).unwrap();
        let g = LossModel::SquaredLinear.per_sample_gradient(&d, 0, &[2.0, 5.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn logistic_gradient_at_origin() {
        let d = Dataset::from_rows(&[vec![1.0]], vec![1.0]).unwrap();
        let g = LossModel::Logistic.per_sample_gradient(&d, 0, &[0.0]).unwrap();
        assert_eq!(g, vec![-0.5]);
    }

    #[test]
    fn gradient_index_out_of_range() {
        let d = toy();
        let err = LossModel::SquaredLinear.per_sample_gradient(&d, 3, &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn non_finite_gradient_names_index() {
        let d = Dataset::from_rows(&[vec![1.0], vec![1e300]], vec![0.0, 0.0]).unwrap();
        let err = LossModel::SquaredLinear.per_sample_gradient(&d, 1, &[1e300]).unwrap_err();
        assert!(err.to_string().contains("sample 1"), "{err}");
    }

    #[test]
    fn empty_minibatch_is_usage_error() {
        let err = LossModel::SquaredLinear.minibatch_gradient(&toy(), &[], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn duplicate_minibatch_equals_single() {
        let d = toy();
        let th = [0.3, -0.7];
        for loss in [LossModel::SquaredLinear, LossModel::Logistic] {
            let d = if loss == LossModel::Logistic {
                Dataset::new(d.x().to_vec(), vec![1.0, 0.0, 1.0], 2).unwrap()
            } else {
                d.clone()
            };
            let a = loss.minibatch_gradient(&d, &[1, 1], &th).unwrap();
            let b = loss.per_sample_gradient(&d, 1, &th).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn squared_hvp_single_sample_exact() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0]], vec![0.3]).unwrap();
        for delta in [1e-2, 1e-6] {
            let h = LossModel::SquaredLinear
                .hvp_finite_difference(&d, &[0], &[0.4, -1.2], &[1.0, 1.0], delta)
                .unwrap();
            assert_eq!(h, vec![3.0, 6.0]);
        }
    }

    #[test]
    fn hvp_zero_direction() {
        let d = toy();
        let h = LossModel::Logistic
            .hvp_finite_difference(&Dataset::new(d.x().to_vec(), vec![0.0, 1.0, 1.0], 2).unwrap(), &[0, 2], &[0.1, 0.2], &[0.0, 0.0], 1e-3)
            .unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
    }

    #[test]
    fn hvp_rejects_bad_delta_and_overflow() {
        let d = toy();
        assert!(matches!(
            LossModel::SquaredLinear.hvp_finite_difference(&d, &[0], &[0.0, 0.0], &[1.0, 1.0], 0.0),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            LossModel::SquaredLinear.hvp_finite_difference(&d, &[0], &[f64::MAX, 0.0], &[f64::MAX, 0.0], 1.0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn sigmoid_increment_matches_direct_difference() {
        for &(a, b) in &[(0.0, 0.5), (3.0, -2.0), (-40.0, 1.0), (20.0, 30.0), (-5.0, -800.0), (1.0, 1e-9)] {
            let direct = sigmoid(a + b) - sigmoid(a);
            let stable = sigmoid_increment(a, b);
            assert!((direct - stable).abs() <= 1e-15 + 1e-9 * direct.abs(), "{a} {b}: {direct} {stable}");
        }
    }

    #[test]
    fn mean_estimation_gradient() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0]], vec![0.0]).unwrap();
        let g = LossModel::MeanEstimation.per_sample_gradient(&d, 0, &[0.5, 0.5]).unwrap();
        assert_eq!(g, vec![-0.5, -1.5]);
        assert_eq!(LossModel::MeanEstimation.hessian(&d, &[0.0, 0.0]), DMatrix::identity(2, 2));
    }

    proptest! {
        #[test]
        fn logistic_gradient_bounded_by_row_norm(
            row in proptest::collection::vec(-5.0f64..5.0, 3),
            theta in proptest::collection::vec(-5.0f64..5.0, 3),
            label in proptest::bool::ANY,
        ) {
            let d = Dataset::new(row.clone(), vec![if label { 1.0 } else { 0.0 }], 3).unwrap();
            let g = LossModel::Logistic.per_sample_gradient(&d, 0, &theta).unwrap();
            prop_assert!(crate::linalg::norm2(&g) <= crate::linalg::norm2(&row) + 1e-12);
        }
    }
}
