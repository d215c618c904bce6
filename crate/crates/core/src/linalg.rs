//! Small dense-vector kernels and a compressed-sparse-row matrix.
//!
//! Vectors are plain `[f64]` slices throughout the crate; every reduction
//! runs left to right so results are reproducible bit for bit.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

/// Elementwise product.
pub fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// `‖a − b‖ / ‖b‖`, or `‖a‖` when `b` vanishes.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm(b);
    let diff = norm(&sub(a, b));
    if denom > 0.0 {
        diff / denom
    } else {
        diff
    }
}

/// Sparse matrix in compressed-sparse-row layout with sorted, unique column
/// indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidArgument(format!(
                    "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite entry at ({r}, {c})")));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_by_key(|a| (a.0, a.1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut trip = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != 0.0 {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trip).expect("dense entries are in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("sparse apply", self.ncols, x.len())?;
        Ok((0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect())
    }

    pub fn mul_transpose_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("sparse transpose apply", self.nrows, v.len())?;
        let mut out = vec![0.0; self.ncols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (c, a) in self.row(r) {
                out[c] += a * vr;
            }
        }
        Ok(out)
    }

    /// Rows listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            if r >= self.nrows {
                return Err(Error::InvalidArgument(format!(
                    "row {r} out of range for {} rows",
                    self.nrows
                )));
            }
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            col_idx.extend_from_slice(&self.col_idx[span.clone()]);
            values.extend_from_slice(&self.values[span]);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: rows.len(),
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn vstack(blocks: &[&SparseMatrix]) -> Result<Self> {
        let ncols = blocks.first().map_or(0, |b| b.ncols);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for b in blocks {
            check_len("vstack columns", ncols, b.ncols)?;
            for r in 0..b.nrows {
                for (c, v) in b.row(r) {
                    col_idx.push(c);
                    values.push(v);
                }
                row_ptr.push(col_idx.len());
            }
        }
        Ok(Self {
            nrows: row_ptr.len() - 1,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Weighted squared column norms `Σ_i w_i A_ij²`.
    pub fn weighted_column_sq_norms(&self, row_weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (r, &w) in row_weights.iter().enumerate().take(self.nrows) {
            for (c, v) in self.row(r) {
                out[c] += w * v * v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}
