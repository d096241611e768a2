//! Hyperparameters of the nested inference loops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound applied to the inner step `τ_j`.
///
/// Large `τ₀` (e.g. 20) makes the inner recursion `(I − τ_j Ĥ_I) g` expand
/// in early iterations whenever `τ_j λ_max(Ĥ_I) > 2`; capping the step at
/// the inverse of the estimated largest curvature keeps it contractive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCap {
    Off,
    Fixed(f64),
    /// `1 / λ_max(Ĥ)` where `λ_max` is estimated at the starting point by
    /// power iteration on finite-difference Hessian-vector products.
    InverseCurvature,
}

impl Default for StepCap {
    fn default() -> Self {
        StepCap::InverseCurvature
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonInferConfig {
    /// `T`
    pub outer_iterations: usize,
    /// `L` (base length; grows as `L (t+1)^{d_L}`).
    pub inner_iterations: usize,
    /// `S_o`, sampled with replacement.
    pub outer_batch: usize,
    /// `S_i`, sampled without replacement.
    pub inner_batch: usize,
    pub rho0: f64,
    pub d_o: f64,
    pub tau0: f64,
    pub d_i: f64,
    pub delta0: f64,
    /// `d_L`; 0 keeps the inner length constant.
    pub inner_growth: f64,
    pub step_cap: StepCap,
    pub seed: u64,
}

impl Default for NewtonInferConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 100,
            inner_iterations: 200,
            outer_batch: 10,
            inner_batch: 10,
            rho0: 0.1,
            d_o: 2.0 / 3.0,
            tau0: 1.0,
            d_i: 2.0 / 3.0,
            delta0: 0.01,
            inner_growth: 0.0,
            step_cap: StepCap::default(),
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

fn decay_in_open_unit_half(key: &str, v: f64) -> Result<()> {
    if v > 0.5 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("decay rate must lie in (1/2, 1), got {v}")))
    }
}

impl NewtonInferConfig {
    /// Full validation, including the decay windows `d_o, d_i ∈ (½, 1)` the
    /// convergence theory needs.
    pub fn validate(&self, n: usize) -> Result<()> {
        self.validate_bounds(n)?;
        decay_in_open_unit_half("d_o", self.d_o)?;
        decay_in_open_unit_half("d_i", self.d_i)
    }

    /// Validation without the decay windows; the engines accept any decay in
    /// `[0, 1)`, which allows the constant-step analysis used for mean
    /// estimation.
    pub fn validate_bounds(&self, n: usize) -> Result<()> {
        if self.outer_iterations == 0 {
            return Err(Error::config("outer_iterations", "T must be at least 1"));
        }
        if self.inner_iterations == 0 {
            return Err(Error::config("inner_iterations", "L must be at least 1"));
        }
        if self.outer_batch == 0 {
            return Err(Error::config("outer_batch", "S_o must be at least 1"));
        }
        if self.inner_batch == 0 || self.inner_batch > n {
            return Err(Error::config(
                "inner_batch",
                format!("S_i must lie in [1, n = {n}], got {}", self.inner_batch),
            ));
        }
        positive("rho0", self.rho0)?;
        positive("tau0", self.tau0)?;
        positive("delta0", self.delta0)?;
        for (key, v) in [("d_o", self.d_o), ("d_i", self.d_i)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(key, format!("decay rate must lie in [0, 1), got {v}")));
            }
        }
        if !(self.inner_growth >= 0.0 && self.inner_growth.is_finite()) {
            return Err(Error::config("inner_growth", "must be a finite non-negative number"));
        }
        if let StepCap::Fixed(c) = self.step_cap {
            positive("step_cap", c)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        NewtonInferConfig::default().validate(100).unwrap();
    }

    #[test]
    fn rejects_decay_outside_window() {
        let cfg = NewtonInferConfig { d_o: 0.4, ..Default::default() };
        let err = cfg.validate(100).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "d_o"));
        cfg.validate_bounds(100).unwrap();
    }

    #[test]
    fn rejects_inner_batch_above_n() {
        let cfg = NewtonInferConfig { inner_batch: 11, ..Default::default() };
        assert!(cfg.validate_bounds(10).is_err());
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let err = serde_json::from_str::<NewtonInferConfig>(r#"{"rho0": 0.2, "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let cfg: NewtonInferConfig = serde_json::from_str(r#"{"rho0": 0.2, "step_cap": {"fixed": 0.5}}"#).unwrap();
        assert_eq!(cfg.rho0, 0.2);
        assert_eq!(cfg.step_cap, StepCap::Fixed(0.5));
    }
}
