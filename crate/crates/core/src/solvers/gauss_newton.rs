use super::linesearch::{armijo_linesearch, LinesearchOutcome};
use super::pcg::{pcg, Preconditioner};
use super::trace::{IterTrace, Stopwatch, TraceRow};
use super::{Objective, SolveReport, SolverConfig, SolverStatus, SumObjective};
use crate::error::{check_len, Result};
use crate::linalg::{dot, norm, relative_error};
use crate::problem::Subproblem;

/// Evaluates an iterate and appends a trace row.
pub(super) fn record(
    trace: &mut IterTrace,
    watch: &Stopwatch,
    iter: usize,
    parts: (f64, f64),
    grad: &[f64],
    x: &[f64],
    truth: Option<&[f64]>,
) {
    trace.push(TraceRow {
        iter,
        time_s: watch.seconds(iter as f64),
        misfit: parts.0,
        reg: parts.1,
        relerr: truth.map(|t| relative_error(x, t)),
        gradnorm: norm(grad),
    });
}

pub(super) fn converged(cfg: &SolverConfig, g: &[f64], f: f64) -> bool {
    norm(g) <= cfg.grad_tol * (1.0 + f.abs())
}

/// Inexact Gauss–Newton on `Σ_j (Φ_j + R_j)`.
pub fn gauss_newton(
    subproblems: &[Subproblem],
    x0: &[f64],
    cfg: &SolverConfig,
    truth: Option<&[f64]>,
) -> Result<SolveReport> {
    gauss_newton_with(&SumObjective::new(subproblems)?, x0, cfg, truth)
}

/// Inexact Gauss–Newton: each step solves `H δ = −∇f` by Jacobi-preconditioned
/// CG and is globalized by an Armijo linesearch.
pub fn gauss_newton_with(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &SolverConfig,
    truth: Option<&[f64]>,
) -> Result<SolveReport> {
    cfg.validate()?;
    check_len("initial guess", obj.dim(), x0.len())?;
    if let Some(t) = truth {
        check_len("reference solution", obj.dim(), t.len())?;
    }
    let watch = Stopwatch::start(cfg.clock);
    let mut trace = IterTrace::default();
    let mut x = x0.to_vec();
    let mut parts = obj.parts(&x)?;
    let mut f = parts.0 + parts.1;
    let mut g = obj.gradient(&x)?;
    record(&mut trace, &watch, 0, parts, &g, &x, truth);

    let mut status = SolverStatus::MaxIterations;
    let mut gammas = Vec::new();
    for k in 1..=cfg.max_outer {
        if converged(cfg, &g, f) {
            status = SolverStatus::Converged;
            break;
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let pre = Preconditioner::Jacobi(obj.gn_hessian_diag(&x)?);
        let sol = pcg(
            |v| obj.gn_hessian_apply(&x, v),
            &rhs,
            None,
            &pre,
            cfg.max_pcg,
            cfg.pcg_tol,
        )?;
        let mut step = sol.x;
        if !(dot(&step, &g) < 0.0) {
            step = rhs;
        }
        match armijo_linesearch(|t| obj.value(t), &x, f, &step, &g, cfg.armijo_c, cfg.linesearch_max)? {
            LinesearchOutcome::Accepted { gamma, x: next, .. } => {
                gammas.push(gamma);
                x = next;
            }
            LinesearchOutcome::Exhausted => {
                status = SolverStatus::LinesearchFailed;
                break;
            }
        }
        parts = obj.parts(&x)?;
        f = parts.0 + parts.1;
        g = obj.gradient(&x)?;
        record(&mut trace, &watch, k, parts, &g, &x, truth);
        if k == cfg.max_outer && converged(cfg, &g, f) {
            status = SolverStatus::Converged;
        }
    }
    Ok(SolveReport {
        x,
        trace,
        status,
        steps: gammas.len(),
        gammas,
        betas: Vec::new(),
    })
}
