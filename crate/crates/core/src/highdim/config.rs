//! Hyperparameters of the high-dimensional pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the de-biasing correction `Ŝ⁻¹ ∇̄` is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DebiasMode {
    /// Dense Cholesky solve; needs `p ≤ dense_limit`.
    ExactDense,
    /// Feature-sampled SVRG on `½uᵀŜu + ⟨∇̄, u⟩`.
    #[default]
    Svrg,
}

/// Where per-coordinate standard errors come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource {
    /// Diagonal of the covariance assembled from the inference replicates.
    #[default]
    Replicates,
    /// Plug-in sandwich `Ŝ⁻¹ M Ŝ⁻¹`.
    Plugin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighDimConfig {
    /// `λ`; derived from the data when absent.
    pub lambda: Option<f64>,
    /// `ω`; derived from the data when absent.
    pub omega: Option<f64>,
    pub c_lambda: f64,
    /// Fixed `c_ω`; when absent it is searched on a grid for small `p`.
    pub c_omega: Option<f64>,
    /// `T`
    pub outer_iterations: usize,
    /// `S_o`
    pub outer_batch: usize,
    /// `S_i`, features per inner step.
    pub inner_batch: usize,
    /// `L_o^t = max(1, ⌈c · ln p · ln(t + 2)⌉)`.
    pub epoch_scale: f64,
    /// Explicit per-`t` epoch counts; overrides `epoch_scale`.
    pub epoch_schedule: Option<Vec<usize>>,
    /// `L_i = ⌈c · p⌉`.
    pub inner_scale: f64,
    /// `τ = c / p`.
    pub tau_scale: f64,
    /// `η = c / p`.
    pub eta_scale: f64,
    /// Epochs of the point-estimate solver.
    pub point_epochs: usize,
    /// Epoch cap of the SVRG de-bias solver, which otherwise stops on
    /// its residual.
    pub debias_epochs: usize,
    pub debias_mode: DebiasMode,
    pub variance: VarianceSource,
    pub dense_limit: usize,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for HighDimConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            omega: None,
            c_lambda: 1.0,
            c_omega: None,
            outer_iterations: 400,
            outer_batch: 1,
            inner_batch: 1,
            epoch_scale: 1.0,
            epoch_schedule: None,
            inner_scale: 1.0,
            tau_scale: 1.0,
            eta_scale: 1.0,
            point_epochs: 60,
            debias_epochs: 300,
            debias_mode: DebiasMode::Svrg,
            variance: VarianceSource::Replicates,
            dense_limit: 64,
            cv_folds: 5,
            seed: 0,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

impl HighDimConfig {
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if let Some(l) = self.lambda {
            positive("lambda", l)?;
        }
        if let Some(w) = self.omega {
            positive("omega", w)?;
        }
        positive("c_lambda", self.c_lambda)?;
        if let Some(c) = self.c_omega {
            positive("c_omega", c)?;
        }
        for (key, v) in [
            ("epoch_scale", self.epoch_scale),
            ("inner_scale", self.inner_scale),
            ("tau_scale", self.tau_scale),
            ("eta_scale", self.eta_scale),
        ] {
            positive(key, v)?;
        }
        if self.outer_iterations == 0 {
            return Err(Error::config("outer_iterations", "must be at least 1"));
        }
        if self.outer_batch == 0 || self.outer_batch > n {
            return Err(Error::config("outer_batch", format!("must lie in 1..={n}")));
        }
        if self.inner_batch == 0 || self.inner_batch > p {
            return Err(Error::config("inner_batch", format!("must lie in 1..={p}")));
        }
        if self.point_epochs == 0 {
            return Err(Error::config("point_epochs", "must be at least 1"));
        }
        if self.debias_epochs == 0 {
            return Err(Error::config("debias_epochs", "must be at least 1"));
        }
        if self.cv_folds < 2 {
            return Err(Error::config("cv_folds", "need at least 2 folds"));
        }
        if let Some(s) = &self.epoch_schedule {
            if s.len() < self.outer_iterations {
                return Err(Error::config(
                    "epoch_schedule",
                    format!("needs {} entries, got {}", self.outer_iterations, s.len()),
                ));
            }
        }
        Ok(())
    }

    /// `L_o^t` for 0-based outer step `t`.
    pub fn epochs_at(&self, t: usize, p: usize) -> usize {
        if let Some(s) = &self.epoch_schedule {
            return s[t];
        }
        let l = self.epoch_scale * (p as f64).ln() * ((t + 2) as f64).ln();
        (l.ceil() as usize).max(1)
    }

    /// `L_i`
    pub fn inner_len(&self, p: usize) -> usize {
        ((self.inner_scale * p as f64).ceil() as usize).max(1)
    }

    pub fn tau(&self, p: usize) -> f64 {
        self.tau_scale / p as f64
    }

    pub fn eta(&self, p: usize) -> f64 {
        self.eta_scale / p as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_schedule_grows_like_log_p_log_t() {
        let c = HighDimConfig::default();
        assert_eq!(c.epochs_at(0, 1000), 5);
        assert!(c.epochs_at(99, 1000) > c.epochs_at(9, 1000));
        assert_eq!(c.epochs_at(0, 1), 1);
        let ratio = c.epochs_at(9999, 1000) as f64 / ((1000f64).ln() * (10001f64).ln());
        assert!((ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn explicit_schedule_wins() {
        let c = HighDimConfig {
            outer_iterations: 2,
            epoch_schedule: Some(vec![3, 7]),
            ..Default::default()
        };
        assert_eq!(c.epochs_at(1, 500), 7);
        c.validate(10, 10).unwrap();
        let short = HighDimConfig {
            outer_iterations: 3,
            ..c
        };
        assert!(short.validate(10, 10).is_err());
    }

    #[test]
    fn steps_scale_inversely_with_p() {
        let c = HighDimConfig::default();
        assert_eq!(c.inner_len(200), 200);
        assert!((c.tau(200) - 0.005).abs() < 1e-15);
        assert!((c.eta(400) - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = HighDimConfig { lambda: Some(0.0), ..Default::default() };
        assert!(bad.validate(10, 10).is_err());
        let bad = HighDimConfig { inner_batch: 11, ..Default::default() };
        assert!(bad.validate(10, 10).is_err());
        let json = r#"{"lambda": 0.1, "bogus": 1}"#;
        assert!(serde_json::from_str::<HighDimConfig>(json).is_err());
        let ok: HighDimConfig = serde_json::from_str(r#"{"debias_mode": "exact_dense"}"#).unwrap();
        assert_eq!(ok.debias_mode, DebiasMode::ExactDense);
    }
}
