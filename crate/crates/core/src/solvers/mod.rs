//! Local and baseline optimizers: preconditioned CG, Gauss–Newton,
//! nonlinear CG and the Armijo linesearch they share.

mod gauss_newton;
mod linesearch;
mod nlcg;
mod pcg;
pub(crate) mod trace;

use crate::error::Result;
use crate::linalg::axpy;
use crate::problem::Subproblem;

pub use gauss_newton::{gauss_newton, gauss_newton_with};
pub use linesearch::{armijo_linesearch, LinesearchOutcome};
pub use nlcg::{nlcg, nlcg_beta, nlcg_with};
pub use pcg::{pcg, PcgResult, PcgStatus, Preconditioner};
pub use trace::{Clock, IterTrace, TraceRow};

/// Coefficient of the nonlinear-CG direction update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaRule {
    /// `β = (d − 2p‖d‖²/(pᵀd))ᵀ g⁺ / (pᵀd)`
    #[default]
    HagerZhang,
    /// `β = 0`: steepest descent with the same linesearch.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_outer: usize,
    pub max_pcg: usize,
    pub pcg_tol: f64,
    pub linesearch_max: usize,
    pub armijo_c: f64,
    /// Stop once `‖∇f‖ ≤ grad_tol · (1 + |f|)`.
    pub grad_tol: f64,
    pub beta_rule: BetaRule,
    pub clock: Clock,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer: 30,
            max_pcg: 200,
            pcg_tol: 1e-8,
            linesearch_max: 20,
            armijo_c: 1e-4,
            grad_tol: 1e-10,
            beta_rule: BetaRule::HagerZhang,
            clock: Clock::Wall,
        }
    }
}

impl SolverConfig {
    /// Defaults for nonlinear CG, which needs more outer iterations.
    pub fn nlcg_default() -> Self {
        Self {
            max_outer: 100,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.max_outer == 0 || self.max_pcg == 0 {
            return Err(Error::InvalidArgument("iteration limits must be at least 1".into()));
        }
        if !(self.pcg_tol > 0.0 && self.armijo_c > 0.0 && self.armijo_c < 1.0 && self.grad_tol >= 0.0) {
            return Err(Error::InvalidArgument("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIterations,
    LinesearchFailed,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIterations => "max_iterations",
            SolverStatus::LinesearchFailed => "linesearch_failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub trace: IterTrace,
    pub status: SolverStatus,
    /// Outer iterations that moved the iterate.
    pub steps: usize,
    /// Step lengths chosen by the linesearch.
    pub gammas: Vec<f64>,
    /// Nonlinear-CG coefficients, one per completed iteration.
    pub betas: Vec<f64>,
}

/// A smooth objective with Gauss–Newton curvature.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// `(data misfit, everything else)`; the objective is their sum.
    fn parts(&self, x: &[f64]) -> Result<(f64, f64)>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        let (m, r) = self.parts(x)?;
        Ok(m + r)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Gauss–Newton Hessian times `v`, linearized at `x`.
    fn gn_hessian_apply(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    /// Diagonal of the Gauss–Newton Hessian at `x` (Jacobi preconditioner).
    fn gn_hessian_diag(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// `f(x) = Σ_j (Φ_j(x) + R_j(x))` over a set of consensus terms.
pub struct SumObjective<'a> {
    subproblems: &'a [Subproblem],
}

impl<'a> SumObjective<'a> {
    pub fn new(subproblems: &'a [Subproblem]) -> Result<Self> {
        use crate::error::Error;
        let n = subproblems
            .first()
            .map(Subproblem::dim)
            .ok_or_else(|| Error::InvalidArgument("no subproblems".into()))?;
        crate::error::check_len(
            "subproblem dimensions",
            n,
            subproblems.iter().map(Subproblem::dim).find(|&d| d != n).unwrap_or(n),
        )?;
        Ok(Self { subproblems })
    }
}

impl Objective for SumObjective<'_> {
    fn dim(&self) -> usize {
        self.subproblems[0].dim()
    }

    fn parts(&self, x: &[f64]) -> Result<(f64, f64)> {
        let mut misfit = 0.0;
        let mut reg = 0.0;
        for s in self.subproblems {
            misfit += s.misfit(x)?;
            reg += s.prior.value_and_gradient(x)?.0;
        }
        Ok((misfit, reg))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        for s in self.subproblems {
            axpy(1.0, &s.misfit_gradient(x)?, &mut g);
            axpy(1.0, &s.prior.value_and_gradient(x)?.1, &mut g);
        }
        Ok(g)
    }

    fn gn_hessian_apply(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        for s in self.subproblems {
            axpy(1.0, &s.misfit_hessian_apply(x, v)?, &mut out);
            axpy(1.0, &s.prior.hessian_apply(v), &mut out);
        }
        Ok(out)
    }

    fn gn_hessian_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        for s in self.subproblems {
            axpy(1.0, &s.misfit_hessian_diag(x)?, &mut out);
            axpy(1.0, &s.prior.hessian_diag(), &mut out);
        }
        Ok(out)
    }
}
