//! Forward operators, test-problem generators, data partitioning and file
//! ingestion.

mod blur;
mod image;
pub mod mtx;
mod partition;
mod tomo;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::linalg::SparseMatrix;

pub use blur::{gaussian_blur_operator, toeplitz_blur_kernel};
pub use image::{blur_truth, shepp_phantom, GridImage};
pub use mtx::{load_matrix_market, synthesize_rhs, write_matrix_market, write_vector_market, MatrixMarket};
pub use partition::{identity_partition, quadrant_rows, row_block_ranges, row_partition};
pub use tomo::{chord_lengths, ray_geometries, tomo_ray_operator, trace_ray, RayGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Dense,
    Sparse,
    IdentityBlock,
    ToyNonlinear,
}

/// Row-selection operator `I_j`: output `i` is input component `rows[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSelection {
    n: usize,
    rows: Vec<usize>,
}

impl RowSelection {
    pub fn new(n: usize, rows: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::InvalidArgument(format!(
                "selected index {bad} out of range for n = {n}"
            )));
        }
        Ok(Self { n, rows })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }
}

/// `F(x) = A x + q (A x)∘(A x)` for a linear `A`.
#[derive(Debug, Clone)]
pub struct ToyNonlinear {
    linear: Box<ForwardOperator>,
    q: f64,
}

impl ToyNonlinear {
    /// Diagonal `1 + 2q (A x)` of the Jacobian's left factor.
    fn jacobian_scale(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.linear.apply(x)?;
        Ok(ax.iter().map(|v| 1.0 + 2.0 * self.q * v).collect())
    }

    pub fn linear_part(&self) -> &ForwardOperator {
        &self.linear
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Parameter-to-observable map of one consensus term.
#[derive(Debug, Clone)]
pub enum ForwardOperator {
    Dense(DMatrix<f64>),
    Sparse(SparseMatrix),
    Selection(RowSelection),
    ToyNonlinear(ToyNonlinear),
}

impl ForwardOperator {
    pub fn identity(n: usize) -> Self {
        ForwardOperator::Selection(RowSelection {
            n,
            rows: (0..n).collect(),
        })
    }

    pub fn kind(&self) -> OperatorKind {
        match self {
            ForwardOperator::Dense(_) => OperatorKind::Dense,
            ForwardOperator::Sparse(_) => OperatorKind::Sparse,
            ForwardOperator::Selection(_) => OperatorKind::IdentityBlock,
            ForwardOperator::ToyNonlinear(_) => OperatorKind::ToyNonlinear,
        }
    }

    pub fn n_in(&self) -> usize {
        match self {
            ForwardOperator::Dense(m) => m.ncols(),
            ForwardOperator::Sparse(m) => m.ncols(),
            ForwardOperator::Selection(s) => s.n,
            ForwardOperator::ToyNonlinear(t) => t.linear.n_in(),
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            ForwardOperator::Dense(m) => m.nrows(),
            ForwardOperator::Sparse(m) => m.nrows(),
            ForwardOperator::Selection(s) => s.rows.len(),
            ForwardOperator::ToyNonlinear(t) => t.linear.n_out(),
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, ForwardOperator::ToyNonlinear(_))
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("operator apply", self.n_in(), x.len())?;
        match self {
            ForwardOperator::Dense(m) => Ok((m * DVector::from_column_slice(x)).as_slice().to_vec()),
            ForwardOperator::Sparse(m) => m.mul_vec(x),
            ForwardOperator::Selection(s) => Ok(s.rows.iter().map(|&r| x[r]).collect()),
            ForwardOperator::ToyNonlinear(t) => {
                let ax = t.linear.apply(x)?;
                Ok(ax.iter().map(|v| v + t.q * v * v).collect())
            }
        }
    }

    /// `Aᵀ v`; only defined for linear operators.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("operator transpose apply", self.n_out(), v.len())?;
        match self {
            ForwardOperator::Dense(m) => Ok((m.transpose() * DVector::from_column_slice(v)).as_slice().to_vec()),
            ForwardOperator::Sparse(m) => m.mul_transpose_vec(v),
            ForwardOperator::Selection(s) => {
                let mut out = vec![0.0; s.n];
                for (&r, &vi) in s.rows.iter().zip(v) {
                    out[r] += vi;
                }
                Ok(out)
            }
            ForwardOperator::ToyNonlinear(_) => Err(Error::InvalidArgument(
                "transpose requested for a nonlinear operator".into(),
            )),
        }
    }

    /// `J(x) v`.
    pub fn jacobian_apply(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        match self {
            ForwardOperator::ToyNonlinear(t) => {
                let d = t.jacobian_scale(x)?;
                let av = t.linear.apply(v)?;
                Ok(d.iter().zip(&av).map(|(a, b)| a * b).collect())
            }
            _ => self.apply(v),
        }
    }

    /// `J(x)ᵀ w`.
    pub fn jacobian_transpose_apply(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        match self {
            ForwardOperator::ToyNonlinear(t) => {
                check_len("jacobian transpose apply", t.linear.n_out(), w.len())?;
                let d = t.jacobian_scale(x)?;
                let dw: Vec<f64> = d.iter().zip(w).map(|(a, b)| a * b).collect();
                t.linear.apply_transpose(&dw)
            }
            _ => self.apply_transpose(w),
        }
    }

    /// Diagonal of `J(x)ᵀ diag(row_weights) J(x)`.
    pub fn normal_diag(&self, x: &[f64], row_weights: &[f64]) -> Result<Vec<f64>> {
        check_len("normal diagonal weights", self.n_out(), row_weights.len())?;
        match self {
            ForwardOperator::Dense(m) => {
                let mut out = vec![0.0; m.ncols()];
                for (c, o) in out.iter_mut().enumerate() {
                    *o = m.column(c).iter().zip(row_weights).map(|(a, w)| w * a * a).sum();
                }
                Ok(out)
            }
            ForwardOperator::Sparse(m) => Ok(m.weighted_column_sq_norms(row_weights)),
            ForwardOperator::Selection(s) => {
                let mut out = vec![0.0; s.n];
                for (&r, &w) in s.rows.iter().zip(row_weights) {
                    out[r] += w;
                }
                Ok(out)
            }
            ForwardOperator::ToyNonlinear(t) => {
                let d = t.jacobian_scale(x)?;
                let scaled: Vec<f64> = d.iter().zip(row_weights).map(|(a, w)| w * a * a).collect();
                t.linear.normal_diag(x, &scaled)
            }
        }
    }

    /// Restriction to the listed output rows (linear operators only).
    pub fn select_rows(&self, rows: &[usize]) -> Result<ForwardOperator> {
        match self {
            ForwardOperator::Dense(m) => {
                if let Some(&bad) = rows.iter().find(|&&r| r >= m.nrows()) {
                    return Err(Error::InvalidArgument(format!("row {bad} out of range")));
                }
                Ok(ForwardOperator::Dense(DMatrix::from_fn(
                    rows.len(),
                    m.ncols(),
                    |i, j| m[(rows[i], j)],
                )))
            }
            ForwardOperator::Sparse(m) => Ok(ForwardOperator::Sparse(m.select_rows(rows)?)),
            ForwardOperator::Selection(s) => {
                let picked = rows
                    .iter()
                    .map(|&r| {
                        s.rows
                            .get(r)
                            .copied()
                            .ok_or_else(|| Error::InvalidArgument(format!("row {r} out of range")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ForwardOperator::Selection(RowSelection::new(s.n, picked)?))
            }
            ForwardOperator::ToyNonlinear(_) => Err(Error::InvalidArgument(
                "row selection requested for a nonlinear operator".into(),
            )),
        }
    }

    /// Sparse copy of a linear operator.
    pub fn to_sparse(&self) -> Result<SparseMatrix> {
        match self {
            ForwardOperator::Dense(m) => Ok(SparseMatrix::from_dense(m)),
            ForwardOperator::Sparse(m) => Ok(m.clone()),
            ForwardOperator::Selection(s) => {
                let trip: Vec<_> = s.rows.iter().enumerate().map(|(i, &c)| (i, c, 1.0)).collect();
                SparseMatrix::from_triplets(s.rows.len(), s.n, &trip)
            }
            ForwardOperator::ToyNonlinear(_) => {
                Err(Error::InvalidArgument("a nonlinear operator has no matrix".into()))
            }
        }
    }

    /// Dense copy of a linear operator.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        match self {
            ForwardOperator::Dense(m) => Ok(m.clone()),
            other => Ok(other.to_sparse()?.to_dense()),
        }
    }
}

/// Wraps a linear operator as `F(x) = A x + q (A x)∘(A x)`.
pub fn toy_nonlinear_operator(linear: ForwardOperator, q: f64) -> Result<ForwardOperator> {
    if !linear.is_linear() {
        return Err(Error::InvalidArgument(
            "the toy nonlinear operator needs a linear inner operator".into(),
        ));
    }
    if !q.is_finite() {
        return Err(Error::InvalidArgument("q must be finite".into()));
    }
    Ok(ForwardOperator::ToyNonlinear(ToyNonlinear {
        linear: Box::new(linear),
        q,
    }))
}
