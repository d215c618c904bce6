use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm};

#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    Identity,
    /// Diagonal of the coefficient matrix; non-positive entries fall back to 1.
    Jacobi(Vec<f64>),
}

impl Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Preconditioner::Identity => r.to_vec(),
            Preconditioner::Jacobi(d) => r
                .iter()
                .zip(d)
                .map(|(ri, &di)| if di > 0.0 && di.is_finite() { ri / di } else { *ri })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcgStatus {
    Converged,
    MaxIter,
    /// A search direction with `pᵀAp ≤ 0` was met; the iterate before it is returned.
    NegativeCurvature,
}

#[derive(Debug, Clone)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iters: usize,
    /// `‖b − Ax‖ / ‖b‖` at exit.
    pub rel_res: f64,
    pub status: PcgStatus,
    /// Relative residual before the first and after every iteration.
    pub residual_history: Vec<f64>,
    /// `½ xᵀAx − bᵀx`, aligned with `residual_history`.
    pub energy_history: Vec<f64>,
}

/// Preconditioned conjugate gradients for `A x = b` with `A` symmetric
/// positive definite, given as a matrix-vector product.
pub fn pcg<F>(
    mut apply: F,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &Preconditioner,
    max_iter: usize,
    tol: f64,
) -> Result<PcgResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    if let Some(x0) = x0 {
        check_len("pcg initial guess", n, x0.len())?;
    }
    if let Preconditioner::Jacobi(d) = precond {
        check_len("pcg preconditioner", n, d.len())?;
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pcg tolerance must be positive, got {tol}"
        )));
    }

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(PcgResult {
            x: vec![0.0; n],
            iters: 0,
            rel_res: 0.0,
            status: PcgStatus::Converged,
            residual_history: vec![0.0],
            energy_history: vec![0.0],
        });
    }

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = apply(&x)?;
        check_len("pcg operator output", n, ax.len())?;
        axpy(-1.0, &ax, &mut r);
    }
    // ½xᵀAx − bᵀx = −½ xᵀ(r + b)
    let energy = |x: &[f64], r: &[f64]| -0.5 * x.iter().zip(r).zip(b).map(|((x, r), b)| x * (r + b)).sum::<f64>();

    let mut rel = norm(&r) / b_norm;
    let mut residual_history = vec![rel];
    let mut energy_history = vec![energy(&x, &r)];
    if rel <= tol {
        return Ok(PcgResult {
            x,
            iters: 0,
            rel_res: rel,
            status: PcgStatus::Converged,
            residual_history,
            energy_history,
        });
    }

    let mut z = precond.apply(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut status = PcgStatus::MaxIter;
    let mut iters = 0;
    while iters < max_iter {
        let ap = apply(&p)?;
        check_len("pcg operator output", n, ap.len())?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            status = PcgStatus::NegativeCurvature;
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        iters += 1;
        rel = norm(&r) / b_norm;
        residual_history.push(rel);
        energy_history.push(energy(&x, &r));
        if rel <= tol {
            status = PcgStatus::Converged;
            break;
        }
        z = precond.apply(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(PcgResult {
        x,
        iters,
        rel_res: rel,
        status,
        residual_history,
        energy_history,
    })
}
