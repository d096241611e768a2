//! One-sample Kolmogorov–Smirnov test against Uniform(0, 1).

use crate::error::{Error, Result};

/// `D_n = sup_x |F_n(x) − x|`.
pub fn ks_statistic_uniform(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::usage("KS statistic needs at least one sample"));
    }
    if samples.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::usage("KS uniform test needs samples in [0, 1]"));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max))
}

/// Critical value of `D_n` at level `alpha`, using the asymptotic Kolmogorov
/// quantile `√(−½ ln(α/2))` with Stephens' finite-sample correction
/// `c / (√n + 0.12 + 0.11/√n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::usage("KS critical value needs n >= 1 and alpha in (0, 1)"));
    }
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let sn = (n as f64).sqrt();
    Ok(c / (sn + 0.12 + 0.11 / sn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn statistic_examples() {
        assert!((ks_statistic_uniform(&[0.5]).unwrap() - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic_uniform(&grid).unwrap() - 0.005).abs() < 1e-12);
        assert!(ks_statistic_uniform(&[]).is_err());
    }

    #[test]
    fn critical_values() {
        let c = ks_critical_value(200, 0.01).unwrap();
        assert!((c - 1.6276 / (200f64.sqrt() + 0.12 + 0.11 / 200f64.sqrt())).abs() < 1e-4);
        assert!((ks_critical_value(1_000_000, 0.05).unwrap() * 1000.0 - 1.3581).abs() < 1e-3);
    }

    #[test]
    fn uniform_samples_pass() {
        let mut rng = crate::rng::stream(1);
        let s: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        assert!(ks_statistic_uniform(&s).unwrap() < ks_critical_value(500, 0.01).unwrap());
        let skewed: Vec<f64> = s.iter().map(|v| v * v).collect();
        assert!(ks_statistic_uniform(&skewed).unwrap() > ks_critical_value(500, 0.01).unwrap());
    }
}
