//! Synchronous weighted consensus ADMM.
//!
//! Each subproblem `j` owns a local copy `x_j` tied to the global `z` through
//! `W_j (x_j − z) = 0`, with unscaled multipliers `u_j`:
//!
//! ```text
//! x_j ← argmin Φ_j(x) + R(x) + u_jᵀ W_j x + ρ/2 ‖W_j (x − z)‖²
//! z   ← (Σ W_j²)⁻¹ Σ (W_j² x_j + W_j u_j / ρ)
//! u_j ← u_j + ρ W_j (x_j − z)
//! ```

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm, relative_error};
use crate::problem::{ConsensusState, DiagonalWeight, Subproblem};
use crate::solvers::trace::Stopwatch;
use crate::solvers::{gauss_newton_with, pcg, Clock, Objective, PcgStatus, Preconditioner, SolverConfig, SolverStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub rho0: f64,
    pub rho_min: f64,
    pub mu: f64,
    pub tau_incr: f64,
    pub tau_decr: f64,
    /// Residual balancing; when off, `ρ` stays at `rho0`.
    pub adaptive: bool,
    /// `None` selects `√(N n)·1e-4 + 1e-3·max(‖Wx‖, ‖Wz‖)`.
    pub eps_pri: Option<f64>,
    pub eps_dual: Option<f64>,
    pub max_outer: usize,
    /// Inner solver for the x-steps: PCG limits for linear terms, Gauss–Newton
    /// iterations for nonlinear ones.
    pub inner: SolverConfig,
    pub clock: Clock,
    /// Run the x-steps of one iteration on the rayon pool. Results are joined
    /// in subproblem order, so the trajectory does not depend on this flag.
    pub parallel: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho0: 5.0,
            rho_min: 1e-12,
            mu: 10.0,
            tau_incr: 2.0,
            tau_decr: 2.0,
            adaptive: true,
            eps_pri: None,
            eps_dual: None,
            max_outer: 10,
            inner: SolverConfig {
                max_outer: 3,
                max_pcg: 500,
                pcg_tol: 1e-10,
                ..SolverConfig::default()
            },
            clock: Clock::Wall,
            parallel: true,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if !(self.mu > 1.0 && self.tau_incr > 1.0 && self.tau_decr > 1.0) {
            return bad("mu, tau_incr and tau_decr must exceed 1");
        }
        if !(self.rho_min > 0.0 && self.rho0 >= self.rho_min && self.rho0.is_finite()) {
            return bad("need 0 < rho_min <= rho0");
        }
        if self.max_outer == 0 {
            return bad("max_outer must be at least 1");
        }
        for eps in [self.eps_pri, self.eps_dual].into_iter().flatten() {
            if !(eps >= 0.0) {
                return bad("stopping tolerances must be nonnegative");
            }
        }
        self.inner.validate()
    }
}

/// `Φ_j(x) + R(x) + u_jᵀ W_j x + ρ/2 ‖W_j (x − z)‖²`.
pub struct AugmentedObjective<'a> {
    pub sub: &'a Subproblem,
    pub z: &'a [f64],
    pub u: &'a [f64],
    pub rho: f64,
}

impl AugmentedObjective<'_> {
    fn w(&self) -> &[f64] {
        self.sub.weight.as_slice()
    }
}

impl Objective for AugmentedObjective<'_> {
    fn dim(&self) -> usize {
        self.sub.dim()
    }

    fn parts(&self, x: &[f64]) -> Result<(f64, f64)> {
        let misfit = self.sub.misfit(x)?;
        let reg = self.sub.prior.value_and_gradient(x)?.0;
        let mut aug = 0.0;
        for (((xi, zi), ui), wi) in x.iter().zip(self.z).zip(self.u).zip(self.w()) {
            let d = wi * (xi - zi);
            aug += ui * wi * xi + 0.5 * self.rho * d * d;
        }
        Ok((misfit, reg + aug))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.sub.misfit_gradient(x)?;
        axpy(1.0, &self.sub.prior.value_and_gradient(x)?.1, &mut g);
        for ((((gi, xi), zi), ui), wi) in g.iter_mut().zip(x).zip(self.z).zip(self.u).zip(self.w()) {
            *gi += wi * ui + self.rho * wi * wi * (xi - zi);
        }
        Ok(g)
    }

    fn gn_hessian_apply(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.sub.misfit_hessian_apply(x, v)?;
        axpy(1.0, &self.sub.prior.hessian_apply(v), &mut h);
        for ((hi, vi), wi) in h.iter_mut().zip(v).zip(self.w()) {
            *hi += self.rho * wi * wi * vi;
        }
        Ok(h)
    }

    fn gn_hessian_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut d = self.sub.misfit_hessian_diag(x)?;
        axpy(1.0, &self.sub.prior.hessian_diag(), &mut d);
        for (di, wi) in d.iter_mut().zip(self.w()) {
            *di += self.rho * wi * wi;
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XStep {
    pub x: Vec<f64>,
    /// False when the inner solver stopped short (PCG cap or curvature
    /// breakdown, or a failed linesearch); `x` is then its best iterate.
    pub converged: bool,
}

/// Local minimization for subproblem `j`, warm-started at `x_prev`.
pub fn x_step(sub: &Subproblem, z: &[f64], u: &[f64], rho: f64, x_prev: &[f64], inner: &SolverConfig) -> Result<XStep> {
    let n = sub.dim();
    check_len("x-step z", n, z.len())?;
    check_len("x-step u", n, u.len())?;
    check_len("x-step warm start", n, x_prev.len())?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "penalty must be nonnegative, got {rho}"
        )));
    }
    let obj = AugmentedObjective { sub, z, u, rho };
    let step = if sub.operator.is_linear() {
        // (AᵀΓ⁻¹A + ∇²R + ρW²) x = AᵀΓ⁻¹y + ∇²R x_ref + ρW²z − W u
        let w = sub.weight.as_slice();
        let mut rhs = sub.operator.apply_transpose(&sub.noise.whiten(&sub.y))?;
        axpy(1.0, &sub.prior.hessian_apply(sub.prior.x_ref()), &mut rhs);
        for (((ri, wi), zi), ui) in rhs.iter_mut().zip(w).zip(z).zip(u) {
            *ri += rho * wi * wi * zi - wi * ui;
        }
        let pre = Preconditioner::Jacobi(obj.gn_hessian_diag(x_prev)?);
        let sol = pcg(
            |v| obj.gn_hessian_apply(x_prev, v),
            &rhs,
            Some(x_prev),
            &pre,
            inner.max_pcg,
            inner.pcg_tol,
        )?;
        XStep {
            x: sol.x,
            converged: sol.status == PcgStatus::Converged,
        }
    } else {
        let rep = gauss_newton_with(&obj, x_prev, inner, None)?;
        XStep {
            x: rep.x,
            converged: rep.status != SolverStatus::LinesearchFailed,
        }
    };
    if step.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("x-step produced a non-finite iterate".into()));
    }
    Ok(step)
}

/// `z = (Σ W_j²)⁻¹ Σ (W_j² x_j + W_j u_j / ρ)`, summed in index order.
pub fn z_step(x: &[Vec<f64>], u: &[Vec<f64>], w: &[&DiagonalWeight], rho: f64) -> Result<Vec<f64>> {
    let parts = x.len();
    if parts == 0 || u.len() != parts || w.len() != parts {
        return Err(Error::InvalidArgument(format!(
            "z-step needs matching nonempty x, u, W (got {}, {}, {})",
            parts,
            u.len(),
            w.len()
        )));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "z-step penalty must be positive, got {rho}"
        )));
    }
    let n = x[0].len();
    for j in 0..parts {
        check_len("z-step x_j", n, x[j].len())?;
        check_len("z-step u_j", n, u[j].len())?;
        check_len("z-step W_j", n, w[j].len())?;
    }
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for j in 0..parts {
        let wj = w[j].as_slice();
        for i in 0..n {
            let wi = wj[i];
            num[i] += wi * wi * x[j][i] + wi * u[j][i] / rho;
            den[i] += wi * wi;
        }
    }
    num.iter()
        .zip(&den)
        .enumerate()
        .map(|(i, (a, d))| {
            if *d > 0.0 {
                Ok(a / d)
            } else {
                Err(Error::ZeroNormalizer { index: i })
            }
        })
        .collect()
}

/// `u_j + ρ W_j (x_j − z)`.
pub fn u_step(u: &[f64], x: &[f64], z: &[f64], w: &DiagonalWeight, rho: f64) -> Vec<f64> {
    u.iter()
        .zip(x)
        .zip(z)
        .zip(w.as_slice())
        .map(|(((ui, xi), zi), wi)| ui + rho * wi * (xi - zi))
        .collect()
}

/// Stacked primal and dual residual norms
/// `‖(W_j (x_j − z))_j‖` and `ρ ‖(W_j (z − z_prev))_j‖`.
pub fn residuals(state: &ConsensusState, z_prev: &[f64], w: &[&DiagonalWeight]) -> (f64, f64) {
    let mut r2 = 0.0;
    let mut s2 = 0.0;
    for (xj, wj) in state.x.iter().zip(w) {
        for (((xi, zi), pi), wi) in xj.iter().zip(&state.z).zip(z_prev).zip(wj.as_slice()) {
            let r = wi * (xi - zi);
            let s = wi * (zi - pi);
            r2 += r * r;
            s2 += s * s;
        }
    }
    (r2.sqrt(), state.rho * s2.sqrt())
}

/// Residual balancing: grow `ρ` when the primal residual dominates, shrink it
/// when the dual residual does. Duals are unscaled and stay as they are.
pub fn adapt_rho(rho: f64, r_norm: f64, s_norm: f64, cfg: &AdmmConfig) -> f64 {
    if r_norm > cfg.mu * s_norm {
        rho * cfg.tau_incr
    } else if s_norm > cfg.mu * r_norm {
        (rho / cfg.tau_decr).max(cfg.rho_min)
    } else {
        rho
    }
}

/// `(ε_pri, ε_dual)` for the current state.
pub fn tolerances(state: &ConsensusState, w: &[&DiagonalWeight], cfg: &AdmmConfig) -> (f64, f64) {
    if let (Some(p), Some(d)) = (cfg.eps_pri, cfg.eps_dual) {
        return (p, d);
    }
    let n = state.z.len();
    let parts = state.x.len();
    let mut wx2 = 0.0;
    let mut wz2 = 0.0;
    for (xj, wj) in state.x.iter().zip(w) {
        for ((xi, zi), wi) in xj.iter().zip(&state.z).zip(wj.as_slice()) {
            wx2 += (wi * xi).powi(2);
            wz2 += (wi * zi).powi(2);
        }
    }
    let auto = ((parts * n) as f64).sqrt() * 1e-4 + 1e-3 * wx2.sqrt().max(wz2.sqrt());
    (cfg.eps_pri.unwrap_or(auto), cfg.eps_dual.unwrap_or(auto))
}

/// Extra columns of an asynchronous run.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncRowInfo {
    pub updates: usize,
    /// Workers whose reports triggered this update, ascending.
    pub reporters: Vec<usize>,
    pub max_staleness: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmRow {
    pub iter: usize,
    pub time_s: f64,
    /// `Σ_j Φ_j(z)`.
    pub misfit: f64,
    pub relerr: Option<f64>,
    pub r_norm: f64,
    pub s_norm: f64,
    /// Penalty used in this iteration.
    pub rho: f64,
    /// x-steps in this iteration whose inner solver stopped short.
    pub inner_failures: usize,
    pub async_info: Option<AsyncRowInfo>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdmmTrace {
    pub rows: Vec<AdmmRow>,
}

impl AdmmTrace {
    pub const HEADER: &'static str = "iter,time_s,misfit,relerr,r_norm,s_norm,rho";
    pub const ASYNC_HEADER: &'static str =
        "iter,time_s,misfit,relerr,r_norm,s_norm,rho,updates,reporter_set,max_staleness";

    pub fn push(&mut self, row: AdmmRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.iter < row.iter));
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&AdmmRow> {
        self.rows.last()
    }

    /// CSV with the synchronous header, or the extended one if any row
    /// carries asynchronous columns. Reporter sets are `;`-separated.
    pub fn to_csv(&self) -> String {
        let is_async = self.rows.iter().any(|r| r.async_info.is_some());
        let mut out = String::from(if is_async { Self::ASYNC_HEADER } else { Self::HEADER });
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter,
                r.time_s,
                r.misfit,
                r.relerr.unwrap_or(f64::NAN),
                r.r_norm,
                r.s_norm,
                r.rho
            );
            if is_async {
                let (updates, set, stale) = match &r.async_info {
                    Some(a) => {
                        let ids: Vec<String> = a.reporters.iter().map(usize::to_string).collect();
                        (a.updates, ids.join(";"), a.max_staleness)
                    }
                    None => (r.iter, String::new(), 0),
                };
                let _ = write!(out, ",{updates},{set},{stale}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// A subproblem failed; the trace holds every iteration before it.
    Failed {
        worker: usize,
        message: String,
    },
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max_iterations",
            StopReason::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdmmRun {
    pub state: ConsensusState,
    pub trace: AdmmTrace,
    pub stop: StopReason,
}

impl AdmmRun {
    pub fn z(&self) -> &[f64] {
        &self.state.z
    }
}

/// Common checks; returns the model dimension.
pub(crate) fn validate_problem(subs: &[Subproblem], truth: Option<&[f64]>, cfg: &AdmmConfig) -> Result<usize> {
    cfg.validate()?;
    let n = subs
        .first()
        .map(Subproblem::dim)
        .ok_or_else(|| Error::InvalidArgument("no subproblems".into()))?;
    for s in subs {
        check_len("subproblem dimension", n, s.dim())?;
        check_len("subproblem weight", n, s.weight.len())?;
        check_len("subproblem reference model", n, s.prior.x_ref().len())?;
    }
    if let Some(t) = truth {
        check_len("reference solution", n, t.len())?;
    }
    Ok(n)
}

/// Outcome of one coordinator update.
pub(crate) struct Update {
    pub row: AdmmRow,
    pub converged: bool,
}

/// z-step over every cached local, dual ascent for `reporters`, residuals,
/// ρ adaptation and the trace row. Advances `state.iter`.
pub(crate) fn consensus_update(
    subs: &[Subproblem],
    state: &mut ConsensusState,
    reporters: &[usize],
    cfg: &AdmmConfig,
    truth: Option<&[f64]>,
    time_s: f64,
) -> Result<Update> {
    let w: Vec<&DiagonalWeight> = subs.iter().map(|s| &s.weight).collect();
    let z_prev = std::mem::take(&mut state.z);
    state.z = z_step(&state.x, &state.u, &w, state.rho)?;
    for &j in reporters {
        state.u[j] = u_step(&state.u[j], &state.x[j], &state.z, w[j], state.rho);
    }
    let (r_norm, s_norm) = residuals(state, &z_prev, &w);
    let (eps_pri, eps_dual) = tolerances(state, &w, cfg);
    let rho = state.rho;
    if cfg.adaptive {
        state.rho = adapt_rho(rho, r_norm, s_norm, cfg);
    }
    state.iter += 1;
    let mut misfit = 0.0;
    for s in subs {
        misfit += s.misfit(&state.z)?;
    }
    Ok(Update {
        row: AdmmRow {
            iter: state.iter,
            time_s,
            misfit,
            relerr: truth.map(|t| relative_error(&state.z, t)),
            r_norm,
            s_norm,
            rho,
            inner_failures: 0,
            async_info: None,
        },
        converged: r_norm <= eps_pri && s_norm <= eps_dual,
    })
}

/// Synchronous consensus ADMM from `x_j = z = x_ref`, `u_j = 0`.
pub fn run_sync(subs: &[Subproblem], cfg: &AdmmConfig, truth: Option<&[f64]>) -> Result<AdmmRun> {
    validate_problem(subs, truth, cfg)?;
    let watch = Stopwatch::start(cfg.clock);
    let mut state = ConsensusState::new(subs.len(), subs[0].prior.x_ref().to_vec(), cfg.rho0);
    let mut trace = AdmmTrace::default();
    let mut stop = StopReason::MaxIterations;
    for _ in 0..cfg.max_outer {
        let solve = |j: usize| x_step(&subs[j], &state.z, &state.u[j], state.rho, &state.x[j], &cfg.inner);
        let steps: Vec<Result<XStep>> = if cfg.parallel {
            (0..subs.len()).into_par_iter().map(solve).collect()
        } else {
            (0..subs.len()).map(solve).collect()
        };
        let mut failures = 0;
        let mut failed = None;
        for (j, step) in steps.into_iter().enumerate() {
            match step {
                Ok(s) => {
                    failures += usize::from(!s.converged);
                    state.x[j] = s.x;
                }
                Err(e) => {
                    failed = Some((j, e));
                    break;
                }
            }
        }
        if let Some((worker, e)) = failed {
            stop = StopReason::Failed {
                worker,
                message: e.to_string(),
            };
            break;
        }
        let all: Vec<usize> = (0..subs.len()).collect();
        let time_s = watch.seconds((state.iter + 1) as f64);
        let mut update = consensus_update(subs, &mut state, &all, cfg, truth, time_s)?;
        update.row.inner_failures = failures;
        trace.push(update.row);
        if update.converged {
            stop = StopReason::Converged;
            break;
        }
    }
    Ok(AdmmRun { state, trace, stop })
}

/// `‖Σ_j u_j‖`, zero along unweighted runs started from zero duals.
pub fn dual_sum_norm(state: &ConsensusState) -> f64 {
    let mut sum = vec![0.0; state.z.len()];
    for u in &state.u {
        axpy(1.0, u, &mut sum);
    }
    norm(&sum)
}

/// Fraction of the data explained: `‖A z − y‖ / ‖y‖` over the stacked terms.
pub fn relative_residual(subs: &[Subproblem], z: &[f64]) -> Result<f64> {
    let mut res2 = 0.0;
    let mut y2 = 0.0;
    for s in subs {
        let r = crate::linalg::sub(&s.operator.apply(z)?, &s.y);
        res2 += dot(&r, &r);
        y2 += dot(&s.y, &s.y);
    }
    Ok(if y2 > 0.0 { (res2 / y2).sqrt() } else { res2.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{identity_partition, row_partition, ForwardOperator};
    use crate::oracle::dense_map;
    use crate::problem::{NoiseCov, PriorSpec};
    use crate::random::{random_dense, random_vec};
    use nalgebra::{DMatrix, DVector};
    use std::sync::Arc;

    fn scalar(a: f64, y: f64, alpha: f64, w: f64) -> Subproblem {
        Subproblem::new(
            Arc::new(ForwardOperator::Dense(DMatrix::from_element(1, 1, a))),
            vec![y],
            NoiseCov::identity(1),
            Arc::new(PriorSpec::smallness(1, alpha).unwrap()),
        )
        .unwrap()
        .with_weight(DiagonalWeight::new(vec![w]).unwrap())
        .unwrap()
    }

    /// `N` row blocks of one random dense system with a smallness prior.
    pub(crate) fn quadratic_problem(m: usize, n: usize, parts: usize, seed: u64) -> (Vec<Subproblem>, Vec<f64>) {
        let a = ForwardOperator::Dense(random_dense(m, n, seed));
        let truth = random_vec(n, seed + 1);
        let y = a.apply(&truth).unwrap();
        let prior = Arc::new(PriorSpec::smallness(n, 0.1).unwrap());
        let subs = row_partition(&a, &y, parts)
            .unwrap()
            .into_iter()
            .map(|(op, yj)| {
                let mj = yj.len();
                Subproblem::new(Arc::new(op), yj, NoiseCov::identity(mj), prior.clone()).unwrap()
            })
            .collect();
        (subs, truth)
    }

    fn exact_inner() -> SolverConfig {
        SolverConfig {
            max_pcg: 1000,
            pcg_tol: 1e-13,
            ..AdmmConfig::default().inner
        }
    }

    #[test]
    fn x_step_pure_data_fit() {
        let y = random_vec(5, 1);
        let sub = Subproblem::new(
            Arc::new(ForwardOperator::identity(5)),
            y.clone(),
            NoiseCov::identity(5),
            Arc::new(PriorSpec::smallness(5, 0.0).unwrap()),
        )
        .unwrap();
        let step = x_step(&sub, &[0.0; 5], &[0.0; 5], 0.0, &[0.0; 5], &exact_inner()).unwrap();
        assert!(relative_error(&step.x, &y) <= 1e-12);
        assert!(step.converged);
    }

    #[test]
    fn x_step_scalar_hand_minimum() {
        // ½x² + ½(x − 2)² is minimized at 1
        let sub = scalar(1.0, 0.0, 0.0, 1.0);
        let step = x_step(&sub, &[2.0], &[0.0], 1.0, &[0.0], &exact_inner()).unwrap();
        assert!((step.x[0] - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn x_step_matches_dense_normal_equations() {
        let a = random_dense(12, 8, 3);
        let noise = NoiseCov::isotropic(12, 0.7).unwrap();
        let prior = PriorSpec::diffusion(4, 2, 0.3)
            .unwrap()
            .with_reference(random_vec(8, 9))
            .unwrap();
        let w: Vec<f64> = (0..8).map(|i| 0.5 + i as f64 * 0.25).collect();
        let sub = Subproblem::new(
            Arc::new(ForwardOperator::Dense(a.clone())),
            random_vec(12, 4),
            noise,
            Arc::new(prior),
        )
        .unwrap()
        .with_weight(DiagonalWeight::new(w.clone()).unwrap())
        .unwrap();
        let (z, u, rho) = (random_vec(8, 5), random_vec(8, 6), 1.7);
        let step = x_step(&sub, &z, &u, rho, &[0.0; 8], &exact_inner()).unwrap();

        let w2 = DMatrix::from_diagonal(&DVector::from_iterator(8, w.iter().map(|v| v * v)));
        let wd = DMatrix::from_diagonal(&DVector::from_vec(w));
        let p = sub.prior.hessian_dense();
        let h = a.transpose() * &a / 0.7 + &p + &w2 * rho;
        let rhs = a.transpose() * DVector::from_column_slice(&sub.y) / 0.7
            + &p * DVector::from_column_slice(sub.prior.x_ref())
            + &w2 * DVector::from_column_slice(&z) * rho
            - wd * DVector::from_column_slice(&u);
        let want = h.lu().solve(&rhs).unwrap();
        assert!(relative_error(&step.x, want.as_slice()) <= 1e-8);
    }

    #[test]
    fn nonlinear_x_step_reduces_augmented_objective() {
        let op = crate::operators::toy_nonlinear_operator(ForwardOperator::Dense(random_dense(10, 6, 2)), 0.1).unwrap();
        let y = op.apply(&random_vec(6, 3)).unwrap();
        let sub = Subproblem::new(
            Arc::new(op),
            y,
            NoiseCov::identity(10),
            Arc::new(PriorSpec::smallness(6, 0.1).unwrap()),
        )
        .unwrap();
        let (z, u) = (random_vec(6, 4), random_vec(6, 5));
        let obj = AugmentedObjective {
            sub: &sub,
            z: &z,
            u: &u,
            rho: 2.0,
        };
        let before = obj.value(&[0.0; 6]).unwrap();
        let step = x_step(&sub, &z, &u, 2.0, &[0.0; 6], &exact_inner()).unwrap();
        assert!(obj.value(&step.x).unwrap() < before);
    }

    #[test]
    fn z_step_examples() {
        let ones = DiagonalWeight::ones(1);
        let z = z_step(&[vec![1.0], vec![4.0]], &[vec![0.0], vec![0.0]], &[&ones, &ones], 1.0).unwrap();
        assert_eq!(z, vec![2.5]);
        let w2 = DiagonalWeight::new(vec![2.0]).unwrap();
        let z = z_step(&[vec![1.0], vec![4.0]], &[vec![0.0], vec![0.0]], &[&w2, &ones], 1.0).unwrap();
        assert!((z[0] - 1.6).abs() <= 1e-15);
        let z = z_step(&[vec![0.0]], &[vec![4.0]], &[&ones], 2.0).unwrap();
        assert_eq!(z, vec![2.0]);
    }

    #[test]
    fn unit_weights_give_plain_average() {
        let x = vec![random_vec(6, 1), random_vec(6, 2), random_vec(6, 3)];
        let u = vec![random_vec(6, 4), random_vec(6, 5), random_vec(6, 6)];
        let ones = DiagonalWeight::ones(6);
        let rho = 0.7;
        let z = z_step(&x, &u, &[&ones, &ones, &ones], rho).unwrap();
        for i in 0..6 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += x[j][i] + u[j][i] / rho;
            }
            assert_eq!(z[i], acc / 3.0);
        }
    }

    #[test]
    fn u_step_examples() {
        let w = DiagonalWeight::new(vec![3.0]).unwrap();
        assert_eq!(u_step(&[0.0], &[1.0], &[0.0], &w, 2.0), vec![6.0]);
        let u = random_vec(4, 1);
        let x = random_vec(4, 2);
        assert_eq!(u_step(&u, &x, &x, &DiagonalWeight::ones(4), 3.0), u);
    }

    #[test]
    fn residual_examples() {
        let mut state = ConsensusState::new(1, vec![0.0, 0.0], 1.0);
        let ones = DiagonalWeight::ones(2);
        assert_eq!(residuals(&state, &[0.0, 0.0], &[&ones]), (0.0, 0.0));
        state.x[0] = vec![3.0, 4.0];
        assert_eq!(residuals(&state, &[0.0, 0.0], &[&ones]), (5.0, 0.0));
    }

    #[test]
    fn residuals_scale_with_weights() {
        let mut state = ConsensusState::new(2, random_vec(5, 1), 1.3);
        state.x = vec![random_vec(5, 2), random_vec(5, 3)];
        let z_prev = random_vec(5, 4);
        let w1 = DiagonalWeight::new(random_vec(5, 5).iter().map(|v| 1.0 + v.abs()).collect()).unwrap();
        let w2 = DiagonalWeight::new(w1.as_slice().iter().map(|v| 2.0 * v).collect()).unwrap();
        let (r1, s1) = residuals(&state, &z_prev, &[&w1, &w1]);
        let (r2, s2) = residuals(&state, &z_prev, &[&w2, &w2]);
        assert!((r2 - 2.0 * r1).abs() <= 1e-12 * r1);
        assert!((s2 - 2.0 * s1).abs() <= 1e-12 * s1);
    }

    #[test]
    fn adaptive_rho_branches() {
        let cfg = AdmmConfig::default();
        assert_eq!(adapt_rho(1.0, 11.0, 1.0, &cfg), 2.0);
        assert_eq!(adapt_rho(1.0, 1.0, 11.0, &cfg), 0.5);
        assert_eq!(adapt_rho(1.0, 3.0, 3.0, &cfg), 1.0);
        assert_eq!(adapt_rho(1.0, 10.0, 1.0, &cfg), 1.0);
        assert_eq!(adapt_rho(1e-12, 0.0, 1.0, &cfg), 1e-12);
    }

    #[test]
    fn config_invariants_checked() {
        let bad = [
            AdmmConfig {
                mu: 1.0,
                ..AdmmConfig::default()
            },
            AdmmConfig {
                tau_incr: 0.5,
                ..AdmmConfig::default()
            },
            AdmmConfig {
                rho0: 1e-13,
                ..AdmmConfig::default()
            },
            AdmmConfig {
                max_outer: 0,
                ..AdmmConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
        assert!(AdmmConfig::default().validate().is_ok());
    }

    #[test]
    fn single_identity_term_converges_to_map() {
        let y = random_vec(9, 2);
        let sub = Subproblem::new(
            Arc::new(ForwardOperator::identity(9)),
            y,
            NoiseCov::identity(9),
            Arc::new(PriorSpec::smallness(9, 0.5).unwrap()),
        )
        .unwrap();
        let subs = [sub];
        let want = dense_map(&subs).unwrap();
        let cfg = AdmmConfig {
            rho0: 1e-3,
            max_outer: 5,
            eps_pri: Some(0.0),
            eps_dual: Some(0.0),
            inner: exact_inner(),
            clock: Clock::Logical,
            ..AdmmConfig::default()
        };
        let run = run_sync(&subs, &cfg, None).unwrap();
        assert!(
            relative_error(run.z(), &want) <= 1e-8,
            "{}",
            relative_error(run.z(), &want)
        );
    }

    #[test]
    fn convex_problem_reaches_oracle_and_residuals_shrink() {
        let (subs, _) = quadratic_problem(60, 20, 4, 7);
        let want = dense_map(&subs).unwrap();
        let cfg = AdmmConfig {
            rho0: 1.0,
            max_outer: 200,
            eps_pri: Some(0.0),
            eps_dual: Some(0.0),
            inner: exact_inner(),
            clock: Clock::Logical,
            ..AdmmConfig::default()
        };
        let run = run_sync(&subs, &cfg, None).unwrap();
        assert!(relative_error(run.z(), &want) <= 1e-6);
        let rows = &run.trace.rows;
        let at = |k: usize| rows[k - 1].r_norm.max(rows[k - 1].s_norm);
        assert!(at(200) <= at(20));
        assert!(dual_sum_norm(&run.state) <= 1e-10 * (1.0 + run.state.u.iter().map(|u| norm(u)).sum::<f64>()));
    }

    #[test]
    fn trajectory_is_deterministic_and_independent_of_threading() {
        let (subs, truth) = quadratic_problem(40, 12, 4, 3);
        let cfg = AdmmConfig {
            max_outer: 15,
            clock: Clock::Logical,
            ..AdmmConfig::default()
        };
        let a = run_sync(&subs, &cfg, Some(&truth)).unwrap();
        let b = run_sync(
            &subs,
            &AdmmConfig {
                parallel: false,
                ..cfg.clone()
            },
            Some(&truth),
        )
        .unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.state, b.state);
        assert_eq!(
            a.trace.to_csv(),
            run_sync(&subs, &cfg, Some(&truth)).unwrap().trace.to_csv()
        );
    }

    #[test]
    fn stops_at_first_iterate_meeting_tolerances() {
        let (subs, _) = quadratic_problem(40, 10, 2, 5);
        let cfg = AdmmConfig {
            rho0: 1.0,
            max_outer: 500,
            eps_pri: Some(1e-4),
            eps_dual: Some(1e-4),
            inner: exact_inner(),
            clock: Clock::Logical,
            ..AdmmConfig::default()
        };
        let run = run_sync(&subs, &cfg, None).unwrap();
        assert_eq!(run.stop, StopReason::Converged);
        let rows = &run.trace.rows;
        let last = rows.last().unwrap();
        assert!(last.r_norm <= 1e-4 && last.s_norm <= 1e-4);
        assert!(rows[..rows.len() - 1]
            .iter()
            .all(|r| r.r_norm > 1e-4 || r.s_norm > 1e-4));
    }

    #[test]
    fn trace_csv_layout() {
        let (subs, truth) = quadratic_problem(20, 6, 2, 1);
        let cfg = AdmmConfig {
            max_outer: 3,
            eps_pri: Some(0.0),
            eps_dual: Some(0.0),
            clock: Clock::Logical,
            ..AdmmConfig::default()
        };
        let csv = run_sync(&subs, &cfg, Some(&truth)).unwrap().trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], AdmmTrace::HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,1,"));
        assert_eq!(lines[3].split(',').count(), 7);
    }

    #[test]
    fn quadrant_split_first_iterate_is_weighted_average() {
        let (w, h) = (8, 8);
        let truth = random_vec(64, 4);
        let prior = Arc::new(PriorSpec::smallness(64, 1e-2).unwrap());
        let subs: Vec<Subproblem> = identity_partition(w, h, 4)
            .unwrap()
            .into_iter()
            .map(|(op, _)| {
                let y = op.apply(&truth).unwrap();
                let m = y.len();
                Subproblem::new(Arc::new(op), y, NoiseCov::identity(m), prior.clone()).unwrap()
            })
            .collect();
        let cfg = AdmmConfig {
            max_outer: 1,
            inner: exact_inner(),
            clock: Clock::Logical,
            ..AdmmConfig::default()
        };
        let run = run_sync(&subs, &cfg, Some(&truth)).unwrap();
        // with zero duals the first z is the mean of the local solutions
        let mut mean = vec![0.0; 64];
        for x in &run.state.x {
            axpy(0.25, x, &mut mean);
        }
        assert!(relative_error(run.z(), &mean) <= 1e-14);
    }

    #[test]
    fn failing_subproblem_aborts_with_partial_trace() {
        let (mut subs, _) = quadratic_problem(20, 6, 2, 1);
        let op =
            crate::operators::toy_nonlinear_operator(ForwardOperator::Dense(random_dense(10, 6, 1) * 1e200), 1e200)
                .unwrap();
        subs[1] = Subproblem::new(
            Arc::new(op),
            vec![1e300; 10],
            NoiseCov::identity(10),
            subs[0].prior.clone(),
        )
        .unwrap();
        let run = run_sync(
            &subs,
            &AdmmConfig {
                clock: Clock::Logical,
                ..AdmmConfig::default()
            },
            None,
        )
        .unwrap();
        assert!(
            matches!(run.stop, StopReason::Failed { worker: 1, .. }),
            "{:?}",
            run.stop
        );
        assert!(run.trace.rows.is_empty());
    }
}
