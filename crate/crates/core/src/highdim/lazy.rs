//! Just-in-time application of the dense part of an SVRG inner step.
//!
//! Within one epoch every inner step subtracts the same vector `step · grad`
//! from every coordinate (followed by an ℓ1 prox), while the stochastic
//! correction only touches the support of a few columns of `Ŝ`. Untouched
//! coordinates are advanced in closed form when they are next read, so an
//! inner step costs `O(S · nnz(column))` instead of `O(p)`.

use super::soft_threshold::{shrink, SoftThresholdCov};

/// `m` applications of `w ↦ Shrink_κ(w − c)`.
pub(crate) fn repeated_prox(mut w: f64, c: f64, kappa: f64, mut m: u64) -> f64 {
    while m > 0 {
        let z = w - c;
        if z > kappa {
            // w decreases by a = c + κ while it stays above a
            let a = c + kappa;
            if a <= 0.0 {
                return w - m as f64 * a;
            }
            let k = (((w - a) / a).ceil().max(1.0) as u64).min(m);
            w -= k as f64 * a;
            m -= k;
        } else if z < -kappa {
            // w decreases by b = c − κ while it stays below b
            let b = c - kappa;
            if b >= 0.0 {
                return w - m as f64 * b;
            }
            let k = (((b - w) / -b).ceil().max(1.0) as u64).min(m);
            w -= k as f64 * b;
            m -= k;
        } else {
            w = 0.0;
            m -= 1;
            if c.abs() <= kappa {
                return 0.0;
            }
        }
    }
    w
}

/// One iterate of a feature-sampled SVRG epoch with lazily applied drift.
pub(crate) struct LazyTrack<'a> {
    x: Vec<f64>,
    stamp: Vec<u64>,
    now: u64,
    grad: &'a [f64],
    step: f64,
    /// `(offset, κ)`: prox of `κ‖offset + ·‖₁`.
    prox: Option<(&'a [f64], f64)>,
    kick: Vec<f64>,
    touched: Vec<usize>,
    mark: Vec<bool>,
    coeffs: Vec<f64>,
}

impl<'a> LazyTrack<'a> {
    pub fn new(x0: &[f64], grad: &'a [f64], step: f64, prox: Option<(&'a [f64], f64)>) -> Self {
        let p = x0.len();
        Self {
            x: x0.to_vec(),
            stamp: vec![0; p],
            now: 0,
            grad,
            step,
            prox,
            kick: vec![0.0; p],
            touched: Vec::new(),
            mark: vec![false; p],
            coeffs: Vec::new(),
        }
    }

    #[inline]
    fn advance(&mut self, j: usize) {
        let m = self.now - self.stamp[j];
        if m == 0 {
            return;
        }
        let c = self.step * self.grad[j];
        self.x[j] = match self.prox {
            None => self.x[j] - m as f64 * c,
            Some((o, kappa)) => repeated_prox(o[j] + self.x[j], c, kappa, m) - o[j],
        };
        self.stamp[j] = self.now;
    }

    #[inline]
    pub fn value(&mut self, j: usize) -> f64 {
        self.advance(j);
        self.x[j]
    }

    /// `x ← prox(x − step·[grad + (p/S) Σ_k (x(k) − anchor(k)) Ŝ[:, k]])`.
    pub fn step(&mut self, cov: &SoftThresholdCov<'_>, batch: &[usize], anchor: &[f64]) {
        let w = self.step * cov.p() as f64 / batch.len() as f64;
        let mut coeffs = std::mem::take(&mut self.coeffs);
        coeffs.clear();
        for &k in batch {
            let v = self.value(k);
            coeffs.push(v - anchor[k]);
        }
        {
            let (kick, touched, mark) = (&mut self.kick, &mut self.touched, &mut self.mark);
            for (&k, &c) in batch.iter().zip(&coeffs) {
                if c != 0.0 {
                    cov.for_each_in_column(k, |r, v| {
                        if !mark[r] {
                            mark[r] = true;
                            touched.push(r);
                        }
                        kick[r] += w * c * v;
                    });
                }
            }
        }
        self.coeffs = coeffs;
        let touched = std::mem::take(&mut self.touched);
        for &r in &touched {
            self.advance(r);
            let z = self.x[r] - self.step * self.grad[r] - self.kick[r];
            self.x[r] = match self.prox {
                None => z,
                Some((o, kappa)) => shrink(o[r] + z, kappa) - o[r],
            };
            self.stamp[r] = self.now + 1;
            self.kick[r] = 0.0;
            self.mark[r] = false;
        }
        self.touched = touched;
        self.touched.clear();
        self.now += 1;
    }

    /// Bring every coordinate up to date.
    pub fn current(&mut self) -> &[f64] {
        for j in 0..self.x.len() {
            self.advance(j);
        }
        &self.x
    }
}
