//! Command bodies. Each writes its files into one output directory and
//! finishes with the manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::RunConfig;
use super::manifest::{CommandKind, RunManifest};
use crate::error::{Error, Result};
use crate::highdim::{plugin_sandwich_highdim, HighDimResult, SandwichMode, SoftThresholdCov};
use crate::inference::{
    coverage_simulation, exact_solver, plugin_sandwich_lowdim, run_method, CovarianceEstimate, CovarianceMeta,
    CovarianceSource, MethodSettings,
};
use crate::linalg::{spd_inverse, symmetrize};
use crate::model::{fmt_f64, Dataset};
use crate::presets::Method;
use crate::time_series::{default_lag, gradients_at, newey_west, HacWeighting};

/// Output directory plus the files written so far.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

/// Run `kind` with a resolved configuration and write the manifest.
pub fn execute(kind: CommandKind, cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<RunManifest> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let mut out = Outputs {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    match kind {
        CommandKind::Coverage => coverage(cfg, &mut out)?,
        _ => estimate(cfg, &mut out)?,
    }
    let manifest = RunManifest {
        command: kind,
        preset: cfg.preset.to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: out.files,
        threads,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    manifest.save(out_dir)?;
    Ok(manifest)
}

fn coverage(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    if cfg.data_path.is_some() {
        return Err(Error::config("data_path", "coverage needs generated data with a known truth"));
    }
    cfg.validate_sizes(cfg.data.n(), cfg.data.p())?;
    let report = coverage_simulation(&cfg.experiment(), cfg.n_sims, cfg.seed, cfg.method)?;
    log::info!(
        "{} / {}: coverage {:.4}, average length {:.4}, {} failures",
        report.preset,
        report.method,
        report.coverage,
        report.avg_length,
        report.failures
    );
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(out.path("coverage.json"), text)?;
    Ok(())
}

fn estimate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let data = cfg.load_data()?;
    cfg.validate_for(&data)?;
    let res = run_method(
        &data,
        &MethodSettings {
            method: cfg.method,
            loss: cfg.loss,
            newton: &cfg.newton,
            lag: cfg.lag,
            highdim: &cfg.highdim,
            level: cfg.level,
        },
    )?;
    res.intervals.save_csv(&out.path("intervals.csv"))?;
    if let Some(run) = &res.run {
        run.save_replicates_csv(&out.path("replicates.csv"))?;
    }
    if let Some(c) = &res.covariance {
        c.save_csv(&out.path("covariance.csv"))?;
    }
    if let Some(hd) = &res.highdim {
        hd.estimate.save_csv(&out.path("highdim.csv"))?;
        write_highdim_summary(hd, &out.path("summary.json"))?;
    }
    if cfg.oracle {
        match &res.highdim {
            Some(hd) => {
                let cov = SoftThresholdCov::auto(&data, hd.hyper.omega, cfg.highdim.dense_limit)?;
                let s = plugin_sandwich_highdim(
                    &data,
                    &hd.estimate.theta_hat,
                    &cov,
                    SandwichMode::Diagonal,
                    cfg.highdim.dense_limit,
                )?;
                let n = data.n() as f64;
                let v: Vec<f64> = s.diagonal().iter().map(|d| d / n).collect();
                write_variances(&v, &out.path("oracle_variance.csv"))?;
            }
            None => oracle_covariance(cfg, &data)?.save_csv(&out.path("oracle_covariance.csv"))?,
        }
    }
    Ok(())
}

/// Dense reference covariance: the plug-in sandwich, with a Newey-West
/// middle for block-sampled runs.
fn oracle_covariance(cfg: &RunConfig, data: &Dataset) -> Result<CovarianceEstimate> {
    let theta = exact_solver(cfg.loss, data, &vec![0.0; data.p()])?;
    if cfg.method != Method::TimeSeries {
        return plugin_sandwich_lowdim(cfg.loss, data, &theta);
    }
    let lag = cfg.lag.unwrap_or_else(|| default_lag(data.n()));
    let g = newey_west(&gradients_at(cfg.loss, data, &theta)?, lag, HacWeighting::AlgorithmImplied)?;
    let h_inv = spd_inverse(&cfg.loss.hessian(data, &theta))?;
    let mut m = &h_inv * g * &h_inv;
    symmetrize(&mut m);
    Ok(CovarianceEstimate {
        matrix: m,
        source: CovarianceSource::NeweyWest,
        meta: CovarianceMeta {
            lag: Some(lag),
            ..Default::default()
        },
    })
}

fn write_variances(v: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(["coord", "variance"])?;
    for (j, x) in v.iter().enumerate() {
        w.write_record([(j + 1).to_string(), fmt_f64(*x)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_highdim_summary(hd: &HighDimResult, path: &Path) -> Result<()> {
    let summary = serde_json::json!({
        "lambda": hd.hyper.lambda,
        "omega": hd.hyper.omega,
        "c_omega": hd.hyper.c_omega,
        "sigma_hat": hd.hyper.sigma_hat,
        "l1_hat": hd.hyper.l1_hat,
        "storage": hd.storage,
        "nonzeros": hd.estimate.theta_hat.iter().filter(|v| **v != 0.0).count(),
        "debias_gap": hd.debias_gap,
    });
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, &summary)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
