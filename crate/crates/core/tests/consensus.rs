use std::sync::Arc;

use proptest::prelude::*;
use wadmm_core::admm::{adapt_rho, run_sync, z_step, AdmmConfig, StopReason};
use wadmm_core::async_engine::{run_async, AsyncConfig, Latency, Scheduler, ZMode};
use wadmm_core::linalg::relative_error;
use wadmm_core::operators::{gaussian_blur_operator, identity_partition, row_partition, toy_nonlinear_operator};
use wadmm_core::oracle::dense_map;
use wadmm_core::random::{random_dense, random_vec};
use wadmm_core::solvers::{gauss_newton, nlcg, Clock, SolverConfig, SolverStatus};
use wadmm_core::uq::compute_weights;
use wadmm_core::{DiagonalWeight, ForwardOperator, NoiseCov, PriorSpec, Subproblem};

fn split(a: &ForwardOperator, y: &[f64], parts: usize, alpha: f64) -> Vec<Subproblem> {
    let prior = Arc::new(PriorSpec::smallness(a.n_in(), alpha).unwrap());
    row_partition(a, y, parts)
        .unwrap()
        .into_iter()
        .map(|(op, yj)| {
            let m = yj.len();
            Subproblem::new(Arc::new(op), yj, NoiseCov::identity(m), prior.clone()).unwrap()
        })
        .collect()
}

fn tight(max_outer: usize) -> AdmmConfig {
    AdmmConfig {
        max_outer,
        eps_pri: Some(0.0),
        eps_dual: Some(0.0),
        inner: SolverConfig {
            max_pcg: 1000,
            pcg_tol: 1e-13,
            ..AdmmConfig::default().inner
        },
        clock: Clock::Logical,
        ..AdmmConfig::default()
    }
}

#[test]
fn weighted_admm_keeps_the_map_fixed_point() {
    let n = 64;
    let a = gaussian_blur_operator(8, 3, 0.7).unwrap();
    let truth = random_vec(n, 1);
    let y = a.apply(&truth).unwrap();
    let subs = split(&a, &y, 4, 1e-2);
    let want = dense_map(&subs).unwrap();
    let report = compute_weights(&subs, &vec![0.0; n], n, 3).unwrap();
    let weighted: Vec<Subproblem> = subs
        .iter()
        .cloned()
        .zip(report.weights)
        .map(|(s, w)| s.with_weight(w).unwrap())
        .collect();
    let run = run_sync(&weighted, &tight(400), None).unwrap();
    let err = relative_error(run.z(), &want);
    assert!(err < 1e-6, "relative distance {err}");
}

#[test]
fn exact_quadrant_weights_beat_unweighted_early() {
    let (w, h) = (8, 8);
    let truth = random_vec(w * h, 4);
    let prior = Arc::new(PriorSpec::smallness(w * h, 1e-2).unwrap());
    let subs: Vec<Subproblem> = identity_partition(w, h, 4)
        .unwrap()
        .into_iter()
        .map(|(op, rows)| {
            let y: Vec<f64> = rows.iter().map(|&r| truth[r]).collect();
            Subproblem::new(Arc::new(op), y, NoiseCov::identity(rows.len()), prior.clone()).unwrap()
        })
        .collect();
    let report = compute_weights(&subs, &vec![0.0; w * h], w * h, 0).unwrap();
    let weighted: Vec<Subproblem> = subs
        .iter()
        .cloned()
        .zip(report.weights)
        .map(|(s, w)| s.with_weight(w).unwrap())
        .collect();
    let cfg = AdmmConfig {
        max_outer: 5,
        ..tight(5)
    };
    let plain = run_sync(&subs, &cfg, Some(&truth)).unwrap();
    let wtd = run_sync(&weighted, &cfg, Some(&truth)).unwrap();
    let (p, q) = (
        plain.trace.last().unwrap().relerr.unwrap(),
        wtd.trace.last().unwrap().relerr.unwrap(),
    );
    assert!(q < p, "weighted {q}, unweighted {p}");
}

#[test]
fn nonlinear_consensus_matches_gauss_newton() {
    let n = 12;
    let lin = ForwardOperator::Dense(random_dense(48, n, 7) * 0.3);
    let truth = random_vec(n, 8);
    let y = toy_nonlinear_operator(lin.clone(), 0.2).unwrap().apply(&truth).unwrap();
    // the nonlinearity acts row by row, so split the linear part first
    let prior = Arc::new(PriorSpec::smallness(n, 0.1).unwrap());
    let subs: Vec<Subproblem> = row_partition(&lin, &y, 4)
        .unwrap()
        .into_iter()
        .map(|(op, yj)| {
            let m = yj.len();
            let op = toy_nonlinear_operator(op, 0.2).unwrap();
            Subproblem::new(Arc::new(op), yj, NoiseCov::identity(m), prior.clone()).unwrap()
        })
        .collect();
    let cfg = SolverConfig {
        max_outer: 50,
        pcg_tol: 1e-13,
        // the Armijo test cannot resolve decreases below rounding of f
        grad_tol: 1e-8,
        clock: Clock::Logical,
        ..SolverConfig::default()
    };
    let gn = gauss_newton(&subs, &vec![0.0; n], &cfg, None).unwrap();
    assert_eq!(gn.status, SolverStatus::Converged);
    let cg = nlcg(
        &subs,
        &vec![0.0; n],
        &SolverConfig {
            max_outer: 500,
            ..cfg.clone()
        },
        None,
    )
    .unwrap();
    assert!(relative_error(&cg.x, &gn.x) < 1e-6);
    let admm = AdmmConfig {
        inner: SolverConfig {
            max_outer: 10,
            ..tight(1).inner
        },
        ..tight(300)
    };
    let run = run_sync(&subs, &admm, None).unwrap();
    assert!(relative_error(run.z(), &gn.x) < 1e-5);
}

#[test]
fn async_run_with_jittered_latencies_reaches_the_map() {
    let a = ForwardOperator::Dense(random_dense(120, 30, 12) * (1.0 / 30f64.sqrt()));
    let truth = random_vec(30, 13);
    let y = a.apply(&truth).unwrap();
    let subs = split(&a, &y, 4, 0.1);
    let want = dense_map(&subs).unwrap();
    let cfg = AsyncConfig {
        n_a: 3,
        k_a: 3,
        scheduler: Scheduler::Simulated {
            seed: 21,
            latencies: vec![
                Latency::TwoPoint {
                    low: 1.0,
                    high: 6.0,
                    p_high: 0.2,
                };
                4
            ],
        },
        z_mode: ZMode::AllCached,
        admm: tight(300),
        fault_worker: None,
    };
    let run = run_async(&subs, &cfg, None).unwrap();
    assert_eq!(run.stop, StopReason::MaxIterations);
    assert!(relative_error(run.z(), &want) < 1e-6);
}

proptest! {
    #[test]
    fn z_step_without_duals_is_a_weighted_average(
        xs in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 6), 1..5),
        ws in prop::collection::vec(prop::collection::vec(1e-3..1e3f64, 6), 5),
        rho in 1e-3..1e3f64,
    ) {
        let parts = xs.len();
        let weights: Vec<DiagonalWeight> = ws[..parts].iter().map(|w| DiagonalWeight::new(w.clone()).unwrap()).collect();
        let refs: Vec<&DiagonalWeight> = weights.iter().collect();
        let u = vec![vec![0.0; 6]; parts];
        let z = z_step(&xs, &u, &refs, rho).unwrap();
        for i in 0..6 {
            let lo = xs.iter().map(|x| x[i]).fold(f64::INFINITY, f64::min);
            let hi = xs.iter().map(|x| x[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(z[i] >= lo - 1e-12 && z[i] <= hi + 1e-12);
        }
    }

    #[test]
    fn adapted_penalty_moves_by_one_factor(rho in 1e-12..1e6f64, r in 0.0..1e3f64, s in 0.0..1e3f64) {
        let cfg = AdmmConfig::default();
        let next = adapt_rho(rho, r, s, &cfg);
        prop_assert!(next == rho || next == rho * 2.0 || next == (rho / 2.0).max(1e-12));
        prop_assert!(next >= 1e-12);
    }
}
