use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Design matrix and responses for one problem instance.
///
/// Rows are stored contiguously (row-major by sample) so per-sample gradient
/// evaluation streams through memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    p: usize,
}

impl Dataset {
    /// Build from a row-major `n x p` buffer and `n` responses.
    pub fn new(x: Vec<f64>, y: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::usage("dataset needs at least one feature"));
        }
        if y.is_empty() {
            return Err(Error::usage("dataset needs at least one sample"));
        }
        if x.len() != y.len() * p {
            return Err(Error::usage(format!(
                "design has {} entries, expected n*p = {}*{}",
                x.len(),
                y.len(),
                p
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite design entry at sample {}, feature {}",
                pos / p,
                pos % p
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite response at sample {i}")));
        }
        let n = y.len();
        Ok(Self { x, y, n, p })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.len() != y.len() {
            return Err(Error::usage("row count and response count differ"));
        }
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::usage("ragged design rows"));
        }
        Self::new(rows.concat(), y, p)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Row-major design buffer.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.x.chunks_exact(self.p)
    }

    /// Check the logistic label invariant `y_i in {0, 1}`.
    pub fn check_binary_labels(&self) -> Result<()> {
        match self.y.iter().position(|&v| v != 0.0 && v != 1.0) {
            Some(i) => Err(Error::usage(format!(
                "logistic responses must be 0 or 1; sample {i} has {}",
                self.y[i]
            ))),
            None => Ok(()),
        }
    }

    /// Design as a column-major `nalgebra` matrix.
    pub fn design_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.p, &self.x)
    }

    /// Write as CSV with header `x1,...,xp,y` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header: Vec<String> = (1..=self.p).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        wtr.write_record(&header)?;
        let mut rec = Vec::with_capacity(self.p + 1);
        for (i, row) in self.rows().enumerate() {
            rec.clear();
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            rec.push(fmt_f64(self.y[i]));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Parse the CSV schema written by [`Dataset::write_csv`]. The last column
    /// is the response.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        let cols = header.len();
        if cols < 2 {
            return Err(Error::usage("dataset CSV needs at least one feature column and `y`"));
        }
        if &header[cols - 1] != "y" {
            return Err(Error::usage("last dataset CSV column must be `y`"));
        }
        let p = cols - 1;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != cols {
                return Err(Error::usage(format!("row {} has {} fields, expected {cols}", line + 1, rec.len())));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::usage(format!("row {}: cannot parse `{field}` as a number", line + 1))
                })?;
                if j < p {
                    x.push(v);
                } else {
                    y.push(v);
                }
            }
        }
        Self::new(x, y, p)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Locale-independent float formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
