use super::gauss_newton::{converged, record};
use super::linesearch::{armijo_linesearch, LinesearchOutcome};
use super::trace::{IterTrace, Stopwatch};
use super::{BetaRule, Objective, SolveReport, SolverConfig, SolverStatus, SumObjective};
use crate::error::{check_len, Result};
use crate::linalg::{dot, norm, sub};
use crate::problem::Subproblem;

/// `β = (1/pᵀd) (d − 2p ‖d‖² / pᵀd)ᵀ g⁺` with `d = g⁺ − g`, or `None` when
/// `|pᵀd|` is negligible relative to `‖p‖‖d‖`.
pub fn nlcg_beta(p: &[f64], d: &[f64], g_new: &[f64]) -> Option<f64> {
    let pd = dot(p, d);
    if !(pd.abs() >= 1e-14 * norm(p) * norm(d)) || pd == 0.0 {
        return None;
    }
    let dd = dot(d, d);
    Some((dot(d, g_new) - 2.0 * dd / pd * dot(p, g_new)) / pd)
}

/// Nonlinear conjugate gradients on `Σ_j (Φ_j + R_j)`.
pub fn nlcg(subproblems: &[Subproblem], x0: &[f64], cfg: &SolverConfig, truth: Option<&[f64]>) -> Result<SolveReport> {
    nlcg_with(&SumObjective::new(subproblems)?, x0, cfg, truth)
}

/// Nonlinear CG with an Armijo linesearch. The direction restarts at `−∇f`
/// when the coefficient is undefined or the new direction is not a descent
/// direction.
pub fn nlcg_with(obj: &dyn Objective, x0: &[f64], cfg: &SolverConfig, truth: Option<&[f64]>) -> Result<SolveReport> {
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
    let mut p: Vec<f64> = g.iter().map(|v| -v).collect();

    let mut status = SolverStatus::MaxIterations;
    let mut gammas = Vec::new();
    let mut betas = Vec::new();
    for k in 1..=cfg.max_outer {
        if converged(cfg, &g, f) {
            status = SolverStatus::Converged;
            break;
        }
        if !(dot(&g, &p) < 0.0) {
            p = g.iter().map(|v| -v).collect();
        }
        match armijo_linesearch(|t| obj.value(t), &x, f, &p, &g, cfg.armijo_c, cfg.linesearch_max)? {
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
        let g_new = obj.gradient(&x)?;
        let beta = match cfg.beta_rule {
            BetaRule::HagerZhang => nlcg_beta(&p, &sub(&g_new, &g), &g_new).unwrap_or(0.0),
            BetaRule::Zero => 0.0,
        };
        betas.push(beta);
        for (pi, gi) in p.iter_mut().zip(&g_new) {
            *pi = -gi + beta * *pi;
        }
        g = g_new;
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
        betas,
    })
}
