//! Dense reference computations for small problems. Everything here forms
//! explicit matrices and refuses sizes above [`ORACLE_CAP`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{NoiseCov, PriorSpec, Subproblem};

/// Largest model dimension the dense routines accept.
pub const ORACLE_CAP: usize = 500;

fn check_cap(n: usize) -> Result<()> {
    if n > ORACLE_CAP {
        Err(Error::SizeCap { n, cap: ORACLE_CAP })
    } else {
        Ok(())
    }
}

fn spd_inverse(h: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = h.cholesky().ok_or(Error::Singular)?;
    Ok(chol.inverse())
}

/// `(Aᵀ Γ_noise⁻¹ A + Γ_prior⁻¹)⁻¹` with the prior precision taken as the
/// diagonal `prior.inv_cov_diag()` (exact for the smallness prior).
pub fn dense_posterior_covariance(a: &DMatrix<f64>, noise: &NoiseCov, prior: &PriorSpec) -> Result<DMatrix<f64>> {
    let n = a.ncols();
    check_cap(n)?;
    if noise.len() != a.nrows() || prior.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "dense posterior covariance",
            expected: a.nrows(),
            actual: noise.len(),
        });
    }
    let gamma_inv = DVector::from_vec(noise.precision());
    let weighted = DMatrix::from_fn(a.nrows(), n, |i, j| gamma_inv[i] * a[(i, j)]);
    let mut h = a.transpose() * weighted;
    for (i, p) in prior.inv_cov_diag().iter().enumerate() {
        h[(i, i)] += p;
    }
    spd_inverse(h)
}

/// Diagonal of [`dense_posterior_covariance`] for one linear subproblem.
pub fn dense_posterior_diag(sub: &Subproblem) -> Result<Vec<f64>> {
    check_cap(sub.dim())?;
    let a = sub.operator.to_dense()?;
    let cov = dense_posterior_covariance(&a, &sub.noise, &sub.prior)?;
    Ok(cov.diagonal().as_slice().to_vec())
}

/// Minimizer of `Σ_j (Φ_j(x) + R_j(x))` for linear terms, by a dense
/// factorization of the normal equations with the exact regularizer Hessians.
pub fn dense_map(subproblems: &[Subproblem]) -> Result<Vec<f64>> {
    let n = subproblems
        .first()
        .map(Subproblem::dim)
        .ok_or_else(|| Error::InvalidArgument("no subproblems".into()))?;
    check_cap(n)?;
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in subproblems {
        if s.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "dense MAP subproblem dimension",
                expected: n,
                actual: s.dim(),
            });
        }
        let a = s.operator.to_dense()?;
        let prec = DVector::from_vec(s.noise.precision());
        let weighted = DMatrix::from_fn(a.nrows(), n, |i, j| prec[i] * a[(i, j)]);
        h += a.transpose() * &weighted;
        rhs += weighted.transpose() * DVector::from_column_slice(&s.y);
        let p = s.prior.hessian_dense();
        rhs += &p * DVector::from_column_slice(s.prior.x_ref());
        h += p;
    }
    let sol = match h.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => h.lu().solve(&rhs).ok_or(Error::Singular)?,
    };
    Ok(sol.as_slice().to_vec())
}

/// 2-norm condition number `σ_max / σ_min` (infinite for rank-deficient
/// matrices), or `None` above the size cap.
pub fn condition_number(a: &DMatrix<f64>) -> Option<f64> {
    if a.nrows().max(a.ncols()) > ORACLE_CAP {
        return None;
    }
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    let rank_tol = max * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    if a.nrows() < a.ncols() || min <= rank_tol {
        Some(f64::INFINITY)
    } else {
        Some(max / min)
    }
}
