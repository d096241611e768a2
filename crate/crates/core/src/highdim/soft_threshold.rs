//! Soft-thresholded sample covariance `Ŝ = Shrink_ω(XᵀX/n)` with column
//! access that never needs a `p × p` array unless explicitly requested.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// `sign(a)(|a| − ω)₊`.
#[inline]
pub fn shrink(a: f64, omega: f64) -> f64 {
    if a > omega {
        a - omega
    } else if a < -omega {
        a + omega
    } else {
        0.0
    }
}

/// Elementwise [`shrink`].
pub fn shrink_matrix(m: &DMatrix<f64>, omega: f64) -> DMatrix<f64> {
    m.map(|v| shrink(v, omega))
}

/// How the thresholded covariance is held.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovStorage {
    /// Columns recomputed from the data on every access; `O(p)` extra memory.
    Implicit,
    /// Nonzeros of every column, computed once in column blocks.
    Sparse,
    /// Full `p × p` matrix; only for small `p`.
    Dense,
}

#[derive(Debug, Clone)]
enum Repr {
    Implicit,
    Sparse {
        col_ptr: Vec<usize>,
        rows: Vec<u32>,
        vals: Vec<f64>,
    },
    Dense(DMatrix<f64>),
}

/// Columns per block while building the sparse cache.
const BUILD_BLOCK: usize = 64;

#[derive(Debug, Clone)]
pub struct SoftThresholdCov<'a> {
    data: &'a Dataset,
    omega: f64,
    repr: Repr,
}

impl<'a> SoftThresholdCov<'a> {
    pub fn new(data: &'a Dataset, omega: f64, storage: CovStorage) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::config("omega", format!("threshold must be finite and >= 0, got {omega}")));
        }
        let repr = match storage {
            CovStorage::Implicit => Repr::Implicit,
            CovStorage::Dense => {
                let x = data.design_matrix();
                let c = x.tr_mul(&x) / data.n() as f64;
                Repr::Dense(shrink_matrix(&c, omega))
            }
            CovStorage::Sparse => build_sparse(data, omega)?,
        };
        Ok(Self { data, omega, repr })
    }

    /// Dense storage up to `dense_limit`, sparse column cache above.
    pub fn auto(data: &'a Dataset, omega: f64, dense_limit: usize) -> Result<Self> {
        let storage = if data.p() <= dense_limit {
            CovStorage::Dense
        } else {
            CovStorage::Sparse
        };
        Self::new(data, omega, storage)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn storage(&self) -> CovStorage {
        match self.repr {
            Repr::Implicit => CovStorage::Implicit,
            Repr::Sparse { .. } => CovStorage::Sparse,
            Repr::Dense(_) => CovStorage::Dense,
        }
    }

    /// Stored nonzeros (`None` for implicit storage).
    pub fn nnz(&self) -> Option<usize> {
        match &self.repr {
            Repr::Implicit => None,
            Repr::Sparse { vals, .. } => Some(vals.len()),
            Repr::Dense(m) => Some(m.iter().filter(|v| **v != 0.0).count()),
        }
    }

    /// `(1/n) Σ_i x_i x_i(k)` into `out` (unthresholded column of `C`).
    fn raw_column_into(&self, k: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let inv = 1.0 / self.data.n() as f64;
        for x in self.data.rows() {
            let a = x[k] * inv;
            if a != 0.0 {
                for (o, v) in out.iter_mut().zip(x) {
                    *o += a * v;
                }
            }
        }
    }

    /// Column `k` of `Ŝ`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        self.axpy_column(k, 1.0, &mut out);
        out
    }

    /// `out += a · Ŝ[:, k]`.
    #[inline]
    pub fn axpy_column(&self, k: usize, a: f64, out: &mut [f64]) {
        match &self.repr {
            Repr::Dense(m) => {
                for (o, v) in out.iter_mut().zip(m.column(k).iter()) {
                    *o += a * v;
                }
            }
            Repr::Sparse { col_ptr, rows, vals } => {
                let (s, e) = (col_ptr[k], col_ptr[k + 1]);
                for (r, v) in rows[s..e].iter().zip(&vals[s..e]) {
                    out[*r as usize] += a * v;
                }
            }
            Repr::Implicit => {
                let mut col = vec![0.0; self.p()];
                self.raw_column_into(k, &mut col);
                for (o, c) in out.iter_mut().zip(&col) {
                    *o += a * shrink(*c, self.omega);
                }
            }
        }
    }

    /// Visit the (possibly) nonzero entries `(row, value)` of column `k`.
    #[inline]
    pub fn for_each_in_column(&self, k: usize, mut f: impl FnMut(usize, f64)) {
        match &self.repr {
            Repr::Dense(m) => {
                for (r, v) in m.column(k).iter().enumerate() {
                    if *v != 0.0 {
                        f(r, *v);
                    }
                }
            }
            Repr::Sparse { col_ptr, rows, vals } => {
                let (s, e) = (col_ptr[k], col_ptr[k + 1]);
                for (r, v) in rows[s..e].iter().zip(&vals[s..e]) {
                    f(*r as usize, *v);
                }
            }
            Repr::Implicit => {
                let mut col = vec![0.0; self.p()];
                self.raw_column_into(k, &mut col);
                for (r, c) in col.iter().enumerate() {
                    let v = shrink(*c, self.omega);
                    if v != 0.0 {
                        f(r, v);
                    }
                }
            }
        }
    }

    /// `Ŝ v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        self.matvec_into(v, &mut out);
        out
    }

    /// `out = Ŝ v`, using `O(p)` working memory for implicit storage.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        match &self.repr {
            Repr::Implicit => {
                // Ŝ is symmetric: (Ŝv)_j = Σ_k Ŝ_jk v_k, one raw column at a time.
                let mut col = vec![0.0; self.p()];
                for (j, o) in out.iter_mut().enumerate() {
                    self.raw_column_into(j, &mut col);
                    *o = col.iter().zip(v).map(|(c, vk)| shrink(*c, self.omega) * vk).sum();
                }
            }
            _ => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (k, &vk) in v.iter().enumerate() {
                    if vk != 0.0 {
                        self.axpy_column(k, vk, out);
                    }
                }
            }
        }
    }

    /// `Ŝ_kk`.
    pub fn diagonal_entry(&self, k: usize) -> f64 {
        match &self.repr {
            Repr::Dense(m) => m[(k, k)],
            Repr::Sparse { col_ptr, rows, vals } => {
                let (s, e) = (col_ptr[k], col_ptr[k + 1]);
                rows[s..e]
                    .iter()
                    .position(|r| *r as usize == k)
                    .map_or(0.0, |i| vals[s + i])
            }
            Repr::Implicit => {
                let c: f64 = self.data.rows().map(|x| x[k] * x[k]).sum::<f64>() / self.data.n() as f64;
                shrink(c, self.omega)
            }
        }
    }

    /// Full matrix, for oracles and small problems; refuses above `limit`.
    pub fn to_dense(&self, limit: usize) -> Result<DMatrix<f64>> {
        let p = self.p();
        if p > limit {
            return Err(Error::usage(format!("refusing to materialize a {p}×{p} matrix (limit {limit})")));
        }
        if let Repr::Dense(m) = &self.repr {
            return Ok(m.clone());
        }
        let mut m = DMatrix::zeros(p, p);
        for k in 0..p {
            let col = self.column(k);
            m.column_mut(k).copy_from_slice(&col);
        }
        Ok(m)
    }
}

fn build_sparse(data: &Dataset, omega: f64) -> Result<Repr> {
    let p = data.p();
    if p > u32::MAX as usize {
        return Err(Error::usage("dimension too large for the sparse covariance cache"));
    }
    let x = data.design_matrix();
    let inv = 1.0 / data.n() as f64;
    let mut col_ptr = Vec::with_capacity(p + 1);
    col_ptr.push(0);
    let mut rows = Vec::new();
    let mut vals = Vec::new();
    let mut k0 = 0;
    while k0 < p {
        let bs = BUILD_BLOCK.min(p - k0);
        let block = x.tr_mul(&x.columns(k0, bs));
        for c in 0..bs {
            for (r, v) in block.column(c).iter().enumerate() {
                let s = shrink(v * inv, omega);
                if s != 0.0 {
                    rows.push(r as u32);
                    vals.push(s);
                }
            }
            col_ptr.push(vals.len());
        }
        k0 += bs;
    }
    Ok(Repr::Sparse { col_ptr, rows, vals })
}
