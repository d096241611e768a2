//! Feature-sampled (proximal) SVRG on quadratics in `Ŝ`.
//!
//! Every solver in this module works on a smooth part whose gradient at `x`
//! is `Ŝx + const`. An inner step samples `S` features without replacement
//! and uses `(p/S) Σ_k (x(k) − anchor(k)) Ŝ[:, k]` as an unbiased estimate
//! of `Ŝ(x − anchor)`.

use crate::approx_newton::sample_inner_batch;
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::rng::{child_stream, tag, StreamRng};

use super::config::HighDimConfig;
use super::objective::{modified_lasso_objective, response_correlation, smooth_gradient};
use super::soft_threshold::{shrink, SoftThresholdCov};

/// Tolerated objective increase between epochs before it counts as a strike.
pub const OBJECTIVE_SLACK: f64 = 1e-8;
/// Consecutive strikes that abort the solver.
pub const MAX_STRIKES: usize = 3;

/// Optional ℓ1 proximal map `x ← Shrink_κ(offset + x) − offset`.
#[derive(Clone, Copy)]
pub(crate) struct Prox<'a> {
    pub offset: Option<&'a [f64]>,
    pub kappa: f64,
}

/// Scratch for [`inner_step`].
pub(crate) struct StepScratch {
    pub batch: Vec<usize>,
    coeffs: Vec<f64>,
}

impl StepScratch {
    pub fn new() -> Self {
        Self {
            batch: Vec::new(),
            coeffs: Vec::new(),
        }
    }
}

/// `x ← prox(x − step·[grad + (p/S) Σ_{k∈batch} (x(k) − anchor(k)) Ŝ[:, k]])`.
///
/// `anchor = None` stands for the zero vector.
#[allow(clippy::too_many_arguments)]
pub(crate) fn inner_step(
    cov: &SoftThresholdCov<'_>,
    x: &mut [f64],
    anchor: Option<&[f64]>,
    grad: &[f64],
    step: f64,
    batch: &[usize],
    coeffs: &mut Vec<f64>,
    prox: Option<Prox<'_>>,
) {
    let w = step * cov.p() as f64 / batch.len() as f64;
    coeffs.clear();
    coeffs.extend(batch.iter().map(|&k| x[k] - anchor.map_or(0.0, |a| a[k])));
    for (xj, gj) in x.iter_mut().zip(grad) {
        *xj -= step * gj;
    }
    for (&k, &c) in batch.iter().zip(coeffs.iter()) {
        if c != 0.0 {
            cov.axpy_column(k, -w * c, x);
        }
    }
    if let Some(Prox { offset, kappa }) = prox {
        match offset {
            None => x.iter_mut().for_each(|v| *v = shrink(*v, kappa)),
            Some(o) => {
                for (v, oj) in x.iter_mut().zip(o) {
                    *v = shrink(oj + *v, kappa) - oj;
                }
            }
        }
    }
}

impl StepScratch {
    pub fn sample(&mut self, rng: &mut StreamRng, p: usize, s: usize) {
        sample_inner_batch(rng, p, s, &mut self.batch);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        cov: &SoftThresholdCov<'_>,
        x: &mut [f64],
        anchor: Option<&[f64]>,
        grad: &[f64],
        step: f64,
        prox: Option<Prox<'_>>,
    ) {
        inner_step(cov, x, anchor, grad, step, &self.batch, &mut self.coeffs, prox);
    }
}

/// Tracks best-so-far objective values and aborts after repeated increases.
pub(crate) struct DivergenceWatch {
    best: f64,
    strikes: usize,
}

impl DivergenceWatch {
    pub fn new(initial: f64) -> Self {
        Self {
            best: initial,
            strikes: 0,
        }
    }

    pub fn observe(&mut self, value: f64, what: &str) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Divergence(format!("{what}: objective became {value}")));
        }
        if value > self.best + OBJECTIVE_SLACK {
            self.strikes += 1;
            if self.strikes >= MAX_STRIKES {
                return Err(Error::Divergence(format!(
                    "{what}: objective increased in {MAX_STRIKES} consecutive epochs (best {:.6e}, now {value:.6e})",
                    self.best
                )));
            }
        } else {
            self.strikes = 0;
        }
        self.best = self.best.min(value);
        Ok(())
    }
}

/// Proximal SVRG for the modified LASSO objective.
///
/// Each epoch takes the full smooth gradient at the anchor, runs `L_i`
/// feature-sampled proximal steps and moves the anchor to the average of
/// the epoch's iterates, its starting point included. Returns the final
/// anchor.
pub fn prox_svrg_point_estimate(
    data: &Dataset,
    cov: &SoftThresholdCov<'_>,
    lambda: f64,
    cfg: &HighDimConfig,
    theta0: &[f64],
) -> Result<Vec<f64>> {
    let p = data.p();
    if theta0.len() != p {
        return Err(Error::usage(format!("theta0 has length {}, expected {p}", theta0.len())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::config("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    cfg.validate(data.n(), p)?;
    check_positive_definite(cov, cfg.dense_limit)?;

    let b = response_correlation(data);
    let eta = cfg.eta(p);
    let inner = cfg.inner_len(p);
    let prox = Some(Prox { offset: None, kappa: eta * lambda });
    let mut rng = child_stream(cfg.seed, 0, tag::ALGORITHM);
    let mut scratch = StepScratch::new();

    let mut anchor = theta0.to_vec();
    let mut watch = DivergenceWatch::new(modified_lasso_objective(data, &anchor, cov, lambda));
    let mut x = vec![0.0; p];
    let mut sum = vec![0.0; p];
    for _ in 0..cfg.point_epochs {
        let grad = smooth_gradient(&anchor, cov, &b);
        x.copy_from_slice(&anchor);
        sum.copy_from_slice(&anchor);
        for _ in 0..inner {
            scratch.sample(&mut rng, p, cfg.inner_batch);
            scratch.step(cov, &mut x, Some(&anchor), &grad, eta, prox);
            for (s, v) in sum.iter_mut().zip(&x) {
                *s += v;
            }
        }
        let mut change = 0.0f64;
        for (a, s) in anchor.iter_mut().zip(&sum) {
            let next = s / (inner + 1) as f64;
            change = change.max((next - *a).abs());
            *a = next;
        }
        watch.observe(modified_lasso_objective(data, &anchor, cov, lambda), "proximal SVRG")?;
        if change == 0.0 {
            break;
        }
    }
    Ok(anchor)
}

/// Smallest eigenvalue check of `Ŝ` when it is small enough to form.
pub fn check_positive_definite(cov: &SoftThresholdCov<'_>, dense_limit: usize) -> Result<()> {
    if cov.p() > dense_limit {
        return Ok(());
    }
    let s = cov.to_dense(dense_limit)?;
    let min = crate::linalg::sym_eigenvalues(&s)[0];
    if min > 0.0 {
        Ok(())
    } else {
        Err(Error::LinearAlgebra(format!(
            "thresholded covariance is not positive definite (smallest eigenvalue {min:.3e}, omega {})",
            cov.omega()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::highdim::objective::kkt_violation;
    use crate::highdim::soft_threshold::CovStorage;
    use crate::inference::normal_equations;
    use crate::linalg::norm_inf;
    use crate::model::{generate_linear, generate_sparse_highdim, CovarianceSpec, SyntheticTruth};

    fn lowdim(p: usize, n: usize, seed: u64) -> Dataset {
        let truth = SyntheticTruth::dense((0..p).map(|j| 0.5 - j as f64 * 0.1).collect(), 0.5);
        generate_linear(n, &CovarianceSpec::ToeplitzDecay { rate: 0.4 }, &truth, seed).unwrap()
    }

    #[test]
    fn huge_penalty_gives_zero() {
        let d = lowdim(6, 40, 1);
        let cov = SoftThresholdCov::new(&d, 0.05, CovStorage::Dense).unwrap();
        let b = response_correlation(&d);
        let lambda = 10.0 * norm_inf(&b);
        let cfg = HighDimConfig { point_epochs: 20, ..Default::default() };
        let theta = prox_svrg_point_estimate(&d, &cov, lambda, &cfg, &[0.3; 6]).unwrap();
        assert!(norm_inf(&theta) < 1e-12, "{theta:?}");
    }

    #[test]
    fn no_threshold_no_penalty_is_ols() {
        let d = lowdim(5, 60, 2);
        let cov = SoftThresholdCov::new(&d, 0.0, CovStorage::Dense).unwrap();
        let cfg = HighDimConfig { point_epochs: 200, ..Default::default() };
        let theta = prox_svrg_point_estimate(&d, &cov, 0.0, &cfg, &[0.0; 5]).unwrap();
        let ols = normal_equations(&d).unwrap();
        for j in 0..5 {
            assert!((theta[j] - ols[j]).abs() < 1e-6, "{j}: {} vs {}", theta[j], ols[j]);
        }
    }

    #[test]
    fn kkt_holds_at_solution() {
        for seed in 0..3 {
            let (d, _) = generate_sparse_highdim(80, 120, 4, 0.5, 0.5, seed).unwrap();
            let omega = ((120f64).ln() / 80.0).sqrt();
            let cov = SoftThresholdCov::new(&d, omega, CovStorage::Sparse).unwrap();
            let b = response_correlation(&d);
            let lambda = 0.3 * norm_inf(&b);
            let cfg = HighDimConfig { point_epochs: 150, seed, ..Default::default() };
            let theta = prox_svrg_point_estimate(&d, &cov, lambda, &cfg, &vec![0.0; 120]).unwrap();
            let v = kkt_violation(&theta, &cov, &b, lambda);
            assert!(v < 1e-4, "seed {seed}: KKT violation {v}");
            assert!(theta.iter().any(|t| *t != 0.0));
        }
    }

    #[test]
    fn objective_does_not_increase_from_start() {
        let (d, _) = generate_sparse_highdim(60, 90, 3, 0.6, 0.5, 9).unwrap();
        let cov = SoftThresholdCov::new(&d, 0.25, CovStorage::Sparse).unwrap();
        let start = vec![0.1; 90];
        let cfg = HighDimConfig { point_epochs: 30, ..Default::default() };
        let theta = prox_svrg_point_estimate(&d, &cov, 0.05, &cfg, &start).unwrap();
        assert!(
            modified_lasso_objective(&d, &theta, &cov, 0.05) <= modified_lasso_objective(&d, &start, &cov, 0.05)
        );
    }

    #[test]
    fn oversized_steps_are_reported_as_divergence() {
        let d = lowdim(5, 40, 3);
        let cov = SoftThresholdCov::new(&d, 0.0, CovStorage::Dense).unwrap();
        let cfg = HighDimConfig { eta_scale: 50.0, point_epochs: 50, ..Default::default() };
        let err = prox_svrg_point_estimate(&d, &cov, 0.01, &cfg, &[0.0; 5]).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "{err}");
    }

    #[test]
    fn indefinite_threshold_is_rejected() {
        // C = [[1, .9], [.9, .82]] is positive definite; thresholding at 0.6
        // gives [[.4, .3], [.3, .22]] with negative determinant.
        let r = 2f64.sqrt();
        let d = Dataset::from_rows(&[vec![r, 0.9 * r], vec![0.0, 0.1 * r]], vec![0.0, 0.0]).unwrap();
        let ok = SoftThresholdCov::new(&d, 0.1, CovStorage::Dense).unwrap();
        check_positive_definite(&ok, 64).unwrap();
        let bad = SoftThresholdCov::new(&d, 0.6, CovStorage::Dense).unwrap();
        assert!(matches!(check_positive_definite(&bad, 64), Err(Error::LinearAlgebra(_))));
        let err = prox_svrg_point_estimate(&d, &bad, 0.1, &HighDimConfig::default(), &[0.0; 2]).unwrap_err();
        assert!(matches!(err, Error::LinearAlgebra(_)));
    }
}
