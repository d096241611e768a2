//! Covariance estimates: replicate assembly and the dense plug-in sandwich.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::approx_newton::{InferenceRun, Replicate};
use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetrize};
use crate::model::{fmt_f64, Dataset, LossModel};

/// Largest dimension handled by the dense plug-in oracle.
pub const DENSE_PLUGIN_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSource {
    Replicates,
    PluginSandwich,
    NeweyWest,
}

/// Settings the estimate was computed with.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovarianceMeta {
    pub outer_iterations: Option<usize>,
    pub inner_iterations: Option<usize>,
    pub outer_batch: Option<usize>,
    pub lag: Option<usize>,
}

/// Estimate of the asymptotic covariance `H⁻¹GH⁻¹` of `√n(θ̂ − θ*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub source: CovarianceSource,
    pub meta: CovarianceMeta,
}

impl CovarianceEstimate {
    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// Dense matrix CSV without header, one row per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for r in 0..self.p() {
            let row: Vec<String> = (0..self.p()).map(|c| fmt_f64(self.matrix[(r, c)])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// `(S_o/T) Σ_t ḡ_t ḡ_tᵀ / ρ_t²`.
pub fn covariance_from_replicates(replicates: &[Replicate], outer_batch: usize) -> Result<CovarianceEstimate> {
    let first = replicates
        .first()
        .ok_or_else(|| Error::usage("covariance needs at least one replicate"))?;
    let p = first.g_bar.len();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for r in replicates {
        if r.g_bar.len() != p {
            return Err(Error::usage("replicates have inconsistent lengths"));
        }
        let inv = 1.0 / (r.rho_t * r.rho_t);
        for a in 0..p {
            let ga = r.g_bar[a] * inv;
            for b in a..p {
                m[(a, b)] += ga * r.g_bar[b];
            }
        }
    }
    m *= outer_batch as f64 / replicates.len() as f64;
    for a in 0..p {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    Ok(CovarianceEstimate {
        matrix: m,
        source: CovarianceSource::Replicates,
        meta: CovarianceMeta {
            outer_iterations: Some(replicates.len()),
            outer_batch: Some(outer_batch),
            ..Default::default()
        },
    })
}

/// Replicate covariance of a run, scaled with its own batch size or block length.
pub fn covariance_from_run(run: &InferenceRun) -> Result<CovarianceEstimate> {
    let mut est = covariance_from_replicates(&run.replicates, run.scale_count)?;
    est.meta.inner_iterations = Some(run.config.inner_iterations);
    if run.replicates.iter().any(|r| r.block_start.is_some()) {
        est.meta.outer_batch = None;
        est.meta.lag = Some(run.scale_count);
    }
    Ok(est)
}

/// Plug-in sandwich `Ĥ⁻¹ĜĤ⁻¹` with analytic Hessians at `theta_hat`.
pub fn plugin_sandwich_lowdim(loss: LossModel, data: &Dataset, theta_hat: &[f64]) -> Result<CovarianceEstimate> {
    let p = data.p();
    if p > DENSE_PLUGIN_LIMIT {
        return Err(Error::usage(format!(
            "dense plug-in covariance supports p <= {DENSE_PLUGIN_LIMIT}, got {p}"
        )));
    }
    if theta_hat.len() != p {
        return Err(Error::usage("estimate length differs from p"));
    }
    let h = loss.hessian(data, theta_hat);
    let h_inv = spd_inverse(&h)?;
    let mut g = DMatrix::<f64>::zeros(p, p);
    for i in 0..data.n() {
        let gi = loss.per_sample_gradient(data, i, theta_hat)?;
        for a in 0..p {
            for b in a..p {
                g[(a, b)] += gi[a] * gi[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    g /= data.n() as f64;
    let mut m = &h_inv * g * &h_inv;
    symmetrize(&mut m);
    Ok(CovarianceEstimate {
        matrix: m,
        source: CovarianceSource::PluginSandwich,
        meta: CovarianceMeta::default(),
    })
}
