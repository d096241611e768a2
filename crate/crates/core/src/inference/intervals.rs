//! Confidence intervals, Z-tests and multiple-testing thresholds.

use std::io::Write;
use std::path::Path;

use super::covariance::CovarianceEstimate;
use super::normal::{normal_quantile, normal_sf};
use crate::error::{Error, Result};
use crate::model::fmt_f64;

/// Rounding tolerance of [`ConfidenceIntervals::covers`], in units of the
/// machine epsilon relative to the compared magnitudes.
pub const COVER_SLACK_ULPS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceIntervals {
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

impl ConfidenceIntervals {
    pub fn lengths(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    /// Per-coordinate coverage of `truth`, allowing [`COVER_SLACK_ULPS`]
    /// of rounding so that exact fits with zero-width intervals count.
    pub fn covers(&self, truth: &[f64]) -> Vec<bool> {
        truth
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let slack = COVER_SLACK_ULPS * f64::EPSILON * self.center[j].abs().max(t.abs());
                self.lower[j] - slack <= *t && *t <= self.upper[j] + slack
            })
            .collect()
    }

    /// `coord,center,lower,upper` (1-based coordinates).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["coord", "center", "lower", "upper"])?;
        for j in 0..self.center.len() {
            out.write_record([
                (j + 1).to_string(),
                fmt_f64(self.center[j]),
                fmt_f64(self.lower[j]),
                fmt_f64(self.upper[j]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Diagonal of a covariance with negative entries clamped to zero (with a warning).
pub(crate) fn clamped_variances(diag: &[f64]) -> Vec<f64> {
    diag.iter()
        .enumerate()
        .map(|(j, &v)| {
            if v < 0.0 {
                log::warn!("negative variance {v:.3e} for coordinate {} clamped to 0", j + 1);
                0.0
            } else {
                v
            }
        })
        .collect()
}

/// `center_j ± z_{(1+level)/2} √(cov_jj / n)`.
pub fn confidence_intervals(
    center: &[f64],
    cov: &CovarianceEstimate,
    n: usize,
    level: f64,
) -> Result<ConfidenceIntervals> {
    confidence_intervals_from_variances(center, &cov.diagonal(), n, level)
}

/// Intervals from per-coordinate asymptotic variances (diagonal of the
/// covariance of `√n(θ̂ − θ*)`).
pub fn confidence_intervals_from_variances(
    center: &[f64],
    variances: &[f64],
    n: usize,
    level: f64,
) -> Result<ConfidenceIntervals> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::usage(format!("confidence level must lie in (0, 1), got {level}")));
    }
    if center.len() != variances.len() {
        return Err(Error::usage("center and covariance dimensions differ"));
    }
    if n == 0 {
        return Err(Error::usage("sample size must be positive"));
    }
    let z = normal_quantile((1.0 + level) / 2.0);
    let vars = clamped_variances(variances);
    let half: Vec<f64> = vars.iter().map(|v| z * (v / n as f64).sqrt()).collect();
    Ok(ConfidenceIntervals {
        center: center.to_vec(),
        lower: center.iter().zip(&half).map(|(c, h)| c - h).collect(),
        upper: center.iter().zip(&half).map(|(c, h)| c + h).collect(),
        level,
    })
}

/// Two-sided p-value for one coordinate; a zero variance gives 0 when the
/// estimate differs from the null and 1 otherwise.
pub fn z_test_pvalue(center: f64, null: f64, variance: f64, n: usize) -> f64 {
    let v = variance.max(0.0);
    if v == 0.0 {
        return if center == null { 1.0 } else { 0.0 };
    }
    let z = (n as f64).sqrt() * (center - null) / v.sqrt();
    (2.0 * normal_sf(z.abs())).min(1.0)
}

/// `p_j = 2(1 − Φ(|z_j|))`, `z_j = √n (center_j − null_j) / √cov_jj`.
pub fn z_test_pvalues(center: &[f64], null: &[f64], cov: &CovarianceEstimate, n: usize) -> Result<Vec<f64>> {
    z_test_pvalues_from_variances(center, null, &cov.diagonal(), n)
}

pub fn z_test_pvalues_from_variances(center: &[f64], null: &[f64], variances: &[f64], n: usize) -> Result<Vec<f64>> {
    if center.len() != null.len() || center.len() != variances.len() {
        return Err(Error::usage("center, null and covariance dimensions differ"));
    }
    let vars = clamped_variances(variances);
    Ok((0..center.len()).map(|j| z_test_pvalue(center[j], null[j], vars[j], n)).collect())
}

/// Flags `p_j ≤ fwer / p`.
pub fn bonferroni_threshold(pvalues: &[f64], fwer: f64) -> Result<Vec<bool>> {
    if !(fwer > 0.0 && fwer < 1.0) {
        return Err(Error::usage(format!("FWER must lie in (0, 1), got {fwer}")));
    }
    let cut = fwer / pvalues.len() as f64;
    Ok(pvalues.iter().map(|&p| p <= cut).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{CovarianceMeta, CovarianceSource};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn cov(diag: &[f64]) -> CovarianceEstimate {
        CovarianceEstimate {
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)),
            source: CovarianceSource::PluginSandwich,
            meta: CovarianceMeta::default(),
        }
    }

    #[test]
    fn interval_example() {
        let ci = confidence_intervals(&[0.0], &cov(&[4.0]), 100, 0.95).unwrap();
        assert!((ci.upper[0] - 0.391993).abs() < 1e-6);
        assert!((ci.lower[0] + 0.391993).abs() < 1e-6);
        assert!(confidence_intervals(&[0.0], &cov(&[4.0]), 100, 1.0).is_err());
    }

    #[test]
    fn tiny_level_degenerates_to_center() {
        let ci = confidence_intervals(&[1.5], &cov(&[4.0]), 100, 1e-12).unwrap();
        assert!((ci.upper[0] - 1.5).abs() < 1e-11 && (ci.lower[0] - 1.5).abs() < 1e-11);
    }

    #[test]
    fn negative_variance_clamped() {
        let ci = confidence_intervals(&[1.0], &cov(&[-1e-18]), 10, 0.95).unwrap();
        assert_eq!(ci.lower, ci.upper);
    }

    #[test]
    fn pvalue_examples() {
        assert_eq!(z_test_pvalue(0.0, 0.0, 1.0, 10), 1.0);
        assert!((z_test_pvalue(1.959964, 0.0, 1.0, 1) - 0.05).abs() < 1e-6);
        assert_eq!(z_test_pvalue(0.1, 0.0, 0.0, 10), 0.0);
        assert_eq!(z_test_pvalue(0.1, 0.1, 0.0, 10), 1.0);
    }

    proptest! {
        #[test]
        fn pvalue_monotone_in_z(a in 0.0f64..8.0, b in 0.0f64..8.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(z_test_pvalue(hi, 0.0, 1.0, 1) <= z_test_pvalue(lo, 0.0, 1.0, 1));
        }

        #[test]
        fn bonferroni_matches_loop(ps in proptest::collection::vec(0.0f64..1.0, 1..50), fwer in 0.001f64..0.5) {
            let flags = bonferroni_threshold(&ps, fwer).unwrap();
            for (j, p) in ps.iter().enumerate() {
                prop_assert_eq!(flags[j], *p <= fwer / ps.len() as f64);
            }
        }

        #[test]
        fn interval_symmetric_ordered(c in -5.0f64..5.0, v in 0.0f64..10.0, n in 1usize..1000, level in 0.01f64..0.999) {
            let ci = confidence_intervals(&[c], &cov(&[v]), n, level).unwrap();
            prop_assert!(ci.lower[0] <= ci.upper[0]);
            prop_assert!(((ci.upper[0] - c) - (c - ci.lower[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni_threshold(&[1.0, 1.0], 0.05).unwrap(), vec![false, false]);
        assert_eq!(bonferroni_threshold(&[0.04 / 3.0, 0.5, 0.9], 0.05).unwrap(), vec![true, false, false]);
    }

    #[test]
    fn wider_level_covers_more() {
        let truth = [0.3, -0.2, 1.0];
        let c = cov(&[1.0, 2.0, 0.5]);
        let center = [0.1, 0.1, 0.9];
        let a = confidence_intervals(&center, &c, 50, 0.95).unwrap().covers(&truth);
        let b = confidence_intervals(&center, &c, 50, 0.99).unwrap().covers(&truth);
        for j in 0..3 {
            assert!(!a[j] || b[j]);
        }
    }

    #[test]
    fn csv_layout() {
        let ci = confidence_intervals(&[0.0, 1.0], &cov(&[1.0, 1.0]), 4, 0.95).unwrap();
        let mut buf = Vec::new();
        ci.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("coord,center,lower,upper\n1,"));
    }
}
