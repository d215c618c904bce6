//! The five subcommands. Each returns a short summary for the terminal; all
//! results go to files in the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use wadmm_core::admm::{relative_residual, run_sync, AdmmConfig, AdmmRun, StopReason};
use wadmm_core::async_engine::{run_async, AsyncConfig, Scheduler, ZMode};
use wadmm_core::linalg::relative_error;
use wadmm_core::operators::{load_matrix_market, write_vector_market, GridImage};
use wadmm_core::oracle::{condition_number, dense_map, dense_posterior_diag, ORACLE_CAP};
use wadmm_core::solvers::{gauss_newton, nlcg, SolverConfig};
use wadmm_core::uq::{compute_weights, parse_weights_csv, WeightReport};
use wadmm_core::{DiagonalWeight, Subproblem};

use crate::config::{Generator, PriorChoice, RunConfig, SchedulerKind, SolverKind, WeightsMode};
use crate::error::{CliError, CliResult};
use crate::problem::{
    assemble, build_prior, create_dir, generate, load_problem, mtx_comments, write_image, write_problem, write_text,
    LoadedProblem,
};

/// What a command reports back.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self { summary, exit_code: 0 }
    }
}

fn problem_dir(cfg: &RunConfig, out: &Path) -> PathBuf {
    cfg.problem_dir
        .as_ref()
        .map(|p| cfg.resolve(p))
        .unwrap_or_else(|| out.to_path_buf())
}

pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let p = generate(cfg)?;
    write_problem(out, cfg, &p)?;
    Ok(Outcome::ok(format!(
        "generated {} problem: n = {}, m = {}, {} parts",
        cfg.problem.as_str(),
        p.n,
        p.m,
        p.parts.len()
    )))
}

pub fn cmd_weights(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let problem = load_problem(&problem_dir(cfg, out), cfg)?;
    let report = match cfg.weights {
        WeightsMode::Identity => WeightReport {
            weights: vec![DiagonalWeight::ones(problem.n); problem.subs.len()],
            requested_rank: 0,
            ranks: vec![0; problem.subs.len()],
            truncation: vec![None; problem.subs.len()],
            seed: cfg.seed,
            wall_time_s: 0.0,
        },
        WeightsMode::Uq => {
            let x_lin = problem.subs[0].prior.x_ref().to_vec();
            compute_weights(&problem.subs, &x_lin, cfg.rank, cfg.seed)?
        }
    };
    create_dir(out)?;
    let mut text = cfg.header("#");
    text.push_str(&report.to_csv());
    write_text(&out.join("weights.csv"), &text)?;
    let ranks: Vec<String> = report.ranks.iter().map(usize::to_string).collect();
    Ok(Outcome::ok(format!(
        "wrote {} weights for {} parts (retained ranks {})",
        cfg.weights.as_str(),
        report.weights.len(),
        ranks.join(" ")
    )))
}

pub fn admm_config(cfg: &RunConfig) -> AdmmConfig {
    AdmmConfig {
        rho0: cfg.rho0,
        adaptive: cfg.adaptive_rho,
        eps_pri: cfg.tol,
        eps_dual: cfg.tol,
        max_outer: cfg.max_iter,
        inner: SolverConfig {
            max_outer: cfg.inner_iter,
            max_pcg: cfg.max_pcg,
            pcg_tol: cfg.pcg_tol,
            clock: cfg.clock,
            ..SolverConfig::default()
        },
        clock: cfg.clock,
        ..AdmmConfig::default()
    }
}

pub fn async_config(cfg: &RunConfig, parts: usize) -> AsyncConfig {
    let scheduler = match cfg.scheduler {
        SchedulerKind::Parallel => Scheduler::Parallel,
        SchedulerKind::Simulated => Scheduler::Simulated {
            seed: cfg.seed,
            latencies: (0..parts)
                .map(|j| {
                    if cfg.slow_worker == Some(j) {
                        cfg.latency.scaled(cfg.slow_factor)
                    } else {
                        cfg.latency
                    }
                })
                .collect(),
        },
    };
    AsyncConfig {
        n_a: cfg.n_a.unwrap_or(parts),
        k_a: cfg.k_a,
        scheduler,
        z_mode: ZMode::AllCached,
        admm: admm_config(cfg),
        fault_worker: None,
    }
}

/// Applies the weight file named by the config, or the default one in the
/// problem directory.
fn apply_weights(cfg: &RunConfig, dir: &Path, subs: Vec<Subproblem>) -> CliResult<Vec<Subproblem>> {
    let path = cfg
        .weights_file
        .as_ref()
        .map(|p| cfg.resolve(p))
        .unwrap_or_else(|| dir.join("weights.csv"));
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let weights = parse_weights_csv(&text, &path)?;
    if weights.len() != subs.len() {
        return Err(CliError::Config(format!(
            "{} has {} weight rows for {} parts",
            path.display(),
            weights.len(),
            subs.len()
        )));
    }
    subs.into_iter()
        .zip(weights)
        .map(|(s, w)| Ok(s.with_weight(w)?))
        .collect()
}

struct SolveResult {
    x: Vec<f64>,
    trace_csv: String,
    status: String,
    iterations: usize,
    failed: Option<String>,
}

fn from_admm(run: AdmmRun) -> SolveResult {
    let failed = match &run.stop {
        StopReason::Failed { worker, message } => Some(format!("worker {worker}: {message}")),
        _ => None,
    };
    SolveResult {
        iterations: run.trace.rows.len(),
        trace_csv: run.trace.to_csv(),
        status: run.stop.as_str().to_string(),
        x: run.state.z,
        failed,
    }
}

fn run_solver(cfg: &RunConfig, problem: &LoadedProblem) -> CliResult<SolveResult> {
    let truth = problem.truth.as_deref();
    let subs = &problem.subs;
    let single = SolverConfig {
        max_outer: cfg.max_iter,
        max_pcg: cfg.max_pcg,
        pcg_tol: cfg.pcg_tol,
        clock: cfg.clock,
        ..SolverConfig::default()
    };
    let x0 = subs[0].prior.x_ref().to_vec();
    Ok(match cfg.solver {
        SolverKind::AdmmSync => from_admm(run_sync(subs, &admm_config(cfg), truth)?),
        SolverKind::AdmmAsync => from_admm(run_async(subs, &async_config(cfg, subs.len()), truth)?),
        SolverKind::GaussNewton | SolverKind::Nlcg => {
            let rep = if cfg.solver == SolverKind::GaussNewton {
                gauss_newton(subs, &x0, &single, truth)?
            } else {
                nlcg(subs, &x0, &single, truth)?
            };
            SolveResult {
                iterations: rep.trace.rows.len().saturating_sub(1),
                trace_csv: rep.trace.to_csv(),
                status: rep.status.as_str().to_string(),
                x: rep.x,
                failed: None,
            }
        }
    })
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "n/a".into())
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let dir = problem_dir(cfg, out);
    let mut problem = load_problem(&dir, cfg)?;
    if cfg.weighted {
        problem.subs = apply_weights(cfg, &dir, std::mem::take(&mut problem.subs))?;
    }
    let result = run_solver(cfg, &problem)?;
    create_dir(out)?;
    let mut trace = cfg.header("#");
    trace.push_str(&result.trace_csv);
    write_text(&out.join("trace.csv"), &trace)?;
    write_vector_market(&out.join("solution.mtx"), &result.x, &mtx_comments(cfg))?;
    if let Some((w, h)) = problem.grid {
        write_image(out, "solution", cfg, GridImage::new(w, h, result.x.clone())?)?;
    }
    let relres = relative_residual(&problem.subs, &result.x)?;
    let relerr = problem.truth.as_ref().map(|t| relative_error(&result.x, t));
    let mut summary = cfg.header("#");
    let _ = writeln!(summary, "solver = {}", cfg.solver.as_str());
    let _ = writeln!(summary, "weighted = {}", cfg.weighted);
    let _ = writeln!(summary, "status = {}", result.status);
    let _ = writeln!(summary, "iterations = {}", result.iterations);
    let _ = writeln!(summary, "relative_residual = {}", fmt_metric(Some(relres)));
    let _ = writeln!(summary, "relative_error = {}", fmt_metric(relerr));
    if let Some(msg) = &result.failed {
        let _ = writeln!(summary, "failure = {msg}");
    }
    write_text(&out.join("summary.txt"), &summary)?;
    let line = format!(
        "{} ({}): status {}, {} iterations, relres {}, relerr {}",
        cfg.solver.as_str(),
        if cfg.weighted { "weighted" } else { "unweighted" },
        result.status,
        result.iterations,
        fmt_metric(Some(relres)),
        fmt_metric(relerr)
    );
    Ok(Outcome {
        summary: line,
        exit_code: if result.failed.is_some() { 1 } else { 0 },
    })
}

pub fn cmd_oracle(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let problem = load_problem(&problem_dir(cfg, out), cfg)?;
    if problem.n > ORACLE_CAP {
        return Err(CliError::Config(format!(
            "dense oracle is limited to n <= {ORACLE_CAP}, problem has n = {}",
            problem.n
        )));
    }
    let x = dense_map(&problem.subs)?;
    create_dir(out)?;
    let comments = mtx_comments(cfg);
    write_vector_market(&out.join("oracle_map.mtx"), &x, &comments)?;
    for (j, s) in problem.subs.iter().enumerate() {
        write_vector_market(
            &out.join(format!("oracle_post{j}.mtx")),
            &dense_posterior_diag(s)?,
            &comments,
        )?;
    }
    let relres = relative_residual(&problem.subs, &x)?;
    let relerr = problem.truth.as_ref().map(|t| relative_error(&x, t));
    Ok(Outcome::ok(format!(
        "dense MAP: relres {}, relerr {}",
        fmt_metric(Some(relres)),
        fmt_metric(relerr)
    )))
}

/// Column names of the batch table.
pub const BATCH_HEADER: &str =
    "matrix,cond,unweighted_residual,unweighted_relerr,weighted_residual,weighted_relerr,status";

/// Entries of a manifest: one path per line, relative to the manifest.
pub fn read_manifest(path: &Path) -> CliResult<Vec<PathBuf>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

struct BatchRow {
    cond: String,
    unweighted: (f64, f64),
    weighted: (f64, f64),
    status: String,
}

/// `(relative residual, relative error)` after the configured iterations.
fn admm_metrics(subs: &[Subproblem], cfg: &AdmmConfig, truth: &[f64]) -> CliResult<(f64, f64, StopReason)> {
    let run = run_sync(subs, cfg, Some(truth))?;
    Ok((
        relative_residual(subs, run.z())?,
        relative_error(run.z(), truth),
        run.stop,
    ))
}

fn batch_entry(cfg: &RunConfig, path: &Path) -> CliResult<BatchRow> {
    let mut entry = cfg.clone();
    entry.problem = Generator::Mtx;
    entry.matrix = Some(path.to_path_buf());
    entry.splitting = None;
    let p = generate(&entry)?;
    let truth = p.truth.clone().ok_or_else(|| {
        CliError::Config(format!(
            "{}: batch runs need a synthesized right-hand side",
            path.display()
        ))
    })?;
    let matrix = load_matrix_market(path)?.matrix;
    let cond = if matrix.nrows().max(matrix.ncols()) <= ORACLE_CAP {
        match condition_number(&matrix.to_dense()) {
            Some(c) if c.is_finite() => format!("{c:.2e}"),
            Some(_) => "Inf".into(),
            None => "n/a".into(),
        }
    } else {
        "n/a".into()
    };
    let subs = assemble(p.parts, build_prior(&entry, p.n, None)?)?;
    let admm = admm_config(&entry);
    let (ur, ue, us) = admm_metrics(&subs, &admm, &truth)?;
    let x_lin = subs[0].prior.x_ref().to_vec();
    let report = compute_weights(&subs, &x_lin, entry.rank, entry.seed)?;
    let weighted = subs
        .into_iter()
        .zip(report.weights)
        .map(|(s, w)| s.with_weight(w))
        .collect::<wadmm_core::Result<Vec<_>>>()?;
    let (wr, we, ws) = admm_metrics(&weighted, &admm, &truth)?;
    let status = match (&us, &ws) {
        (StopReason::Failed { .. }, _) | (_, StopReason::Failed { .. }) => {
            format!("failed ({}/{})", us.as_str(), ws.as_str())
        }
        _ => "ok".into(),
    };
    Ok(BatchRow {
        cond,
        unweighted: (ur, ue),
        weighted: (wr, we),
        status,
    })
}

pub fn cmd_batch(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    if cfg.prior == PriorChoice::Diffusion {
        return Err(CliError::Config("batch runs use the smallness prior".into()));
    }
    let manifest = cfg
        .manifest
        .as_ref()
        .map(|m| cfg.resolve(m))
        .ok_or_else(|| CliError::Config("batch needs a manifest".into()))?;
    let entries = read_manifest(&manifest)?;
    let mut table = cfg.header("#");
    table.push_str(BATCH_HEADER);
    table.push('\n');
    let (mut wins, mut done) = (0, 0);
    for path in &entries {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match batch_entry(cfg, path) {
            Ok(row) => {
                done += 1;
                if row.weighted.1 <= row.unweighted.1 {
                    wins += 1;
                }
                let _ = writeln!(
                    table,
                    "{name},{},{:.6e},{:.6e},{:.6e},{:.6e},{}",
                    row.cond, row.unweighted.0, row.unweighted.1, row.weighted.0, row.weighted.1, row.status
                );
            }
            Err(e) => {
                let msg = e.to_string().replace(',', ";");
                let _ = writeln!(table, "{name},n/a,NaN,NaN,NaN,NaN,error: {msg}");
            }
        }
    }
    create_dir(out)?;
    write_text(&out.join("results.csv"), &table)?;
    Ok(Outcome::ok(format!(
        "batch: {done} of {} matrices solved; weighted relerr <= unweighted on {wins}",
        entries.len()
    )))
}
