//! Run traces, replicates and their CSV export.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NewtonInferConfig;
use crate::error::{Error, Result};
use crate::model::fmt_f64;

/// Which engine produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Stochastic Newton steps with SGD inner solves.
    Sgd,
    /// SVRG point track with the SGD replicate track.
    Svrg,
    /// Circular-block outer sampling for dependent data.
    TimeSeries,
    /// Proximal Newton steps for the ℓ1-regularized problem.
    HighDim,
}

/// One outer iteration's inference output.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub t: usize,
    /// `ḡ_t`, the average of the inner iterates.
    pub g_bar: Vec<f64>,
    pub rho_t: f64,
    /// `√S · ḡ_t / ρ_t`, with `S` the outer batch size (or block length).
    pub scaled: Vec<f64>,
    /// First index of the sampled block, for block-sampled runs.
    pub block_start: Option<usize>,
}

impl Replicate {
    pub fn new(t: usize, g_bar: Vec<f64>, rho_t: f64, scale_count: usize, block_start: Option<usize>) -> Self {
        let c = (scale_count as f64).sqrt() / rho_t;
        let scaled = g_bar.iter().map(|v| c * v).collect();
        Self {
            t,
            g_bar,
            rho_t,
            scaled,
            block_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRun {
    pub algorithm: Algorithm,
    /// `θ_0, …, θ_T`.
    pub theta_trace: Vec<Vec<f64>>,
    pub replicates: Vec<Replicate>,
    /// `(1/T) Σ_{t=1}^T θ_t`.
    pub theta_avg: Vec<f64>,
    /// Multiplicity used when scaling replicates (`S_o`, or block length).
    pub scale_count: usize,
    pub config: NewtonInferConfig,
}

impl InferenceRun {
    pub(crate) fn new(
        algorithm: Algorithm,
        theta_trace: Vec<Vec<f64>>,
        replicates: Vec<Replicate>,
        scale_count: usize,
        config: NewtonInferConfig,
    ) -> Self {
        let theta_avg = trace_average(&theta_trace);
        Self {
            algorithm,
            theta_trace,
            replicates,
            theta_avg,
            scale_count,
            config,
        }
    }

    pub fn p(&self) -> usize {
        self.theta_trace[0].len()
    }

    pub fn final_theta(&self) -> &[f64] {
        self.theta_trace.last().expect("trace holds θ_0")
    }

    /// Replicate table: `t,rho_t,g1..gp` (plus `block_start` for block-sampled runs).
    pub fn write_replicates_csv<W: Write>(&self, w: W) -> Result<()> {
        let with_block = self.replicates.iter().any(|r| r.block_start.is_some());
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header = vec!["t".to_string(), "rho_t".to_string()];
        header.extend((1..=self.p()).map(|j| format!("g{j}")));
        if with_block {
            header.push("block_start".into());
        }
        out.write_record(&header)?;
        for r in &self.replicates {
            let mut rec = vec![r.t.to_string(), fmt_f64(r.rho_t)];
            rec.extend(r.scaled.iter().map(|v| fmt_f64(*v)));
            if with_block {
                rec.push(r.block_start.map(|b| b.to_string()).unwrap_or_default());
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(Error::Io)?;
        Ok(())
    }

    pub fn save_replicates_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_replicates_csv(std::io::BufWriter::new(f))
    }
}

fn trace_average(trace: &[Vec<f64>]) -> Vec<f64> {
    let p = trace[0].len();
    let tail = &trace[1..];
    if tail.is_empty() {
        return trace[0].clone();
    }
    let mut avg = vec![0.0; p];
    for th in tail {
        for (a, v) in avg.iter_mut().zip(th) {
            *a += v;
        }
    }
    let inv = 1.0 / tail.len() as f64;
    avg.iter_mut().for_each(|a| *a *= inv);
    avg
}

/// Averaged iterate `(1/T) Σ_{t=1}^T θ_t`.
pub fn averaged_estimate(run: &InferenceRun) -> Vec<f64> {
    trace_average(&run.theta_trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_with_trace(trace: Vec<Vec<f64>>) -> InferenceRun {
        InferenceRun::new(Algorithm::Sgd, trace, vec![], 1, NewtonInferConfig::default())
    }

    #[test]
    fn constant_trace_average() {
        let run = run_with_trace(vec![vec![0.0, 0.0], vec![1.5, -2.0], vec![1.5, -2.0], vec![1.5, -2.0]]);
        assert_eq!(averaged_estimate(&run), vec![1.5, -2.0]);
    }

    #[test]
    fn two_point_midpoint() {
        let run = run_with_trace(vec![vec![9.0], vec![1.0], vec![3.0]]);
        assert_eq!(averaged_estimate(&run), vec![2.0]);
        assert_eq!(run.theta_avg, vec![2.0]);
    }

    #[test]
    fn replicate_scaling() {
        let r = Replicate::new(0, vec![0.2, -0.1], 0.1, 4, None);
        assert!((r.scaled[0] - 4.0).abs() < 1e-14 && (r.scaled[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn replicate_csv_layout() {
        let mut run = run_with_trace(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        run.replicates.push(Replicate::new(0, vec![0.1, 0.2], 0.1, 1, Some(3)));
        let mut buf = Vec::new();
        run.write_replicates_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,rho_t,g1,g2,block_start");
        assert!(lines.next().unwrap().starts_with("0,1.0000000000000001e-1,"));
        assert!(text.ends_with(",3\n"));
    }
}
