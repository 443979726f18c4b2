//! End-to-end checks of the offline/online pipeline on small and reference problems.

use std::sync::Arc;

use rbcert::eim::{eim_build, SnapshotBank};
use rbcert::experiment::{evaluate, summarize, test_parameters, RunOptions, TruthBank};
use rbcert::offline::{pod_greedy, GreedySettings, RbModel};
use rbcert::online::{rb_solve, JacobianMode, OnlineSettings};
use rbcert::truth::{NewtonSettings, ProblemConfig, TruthProblem};

fn build(cfg: &ProblemConfig, eim_train: usize, greedy_train: usize, m_max: usize, n_max: usize) -> RbModel {
    let problem = Arc::new(TruthProblem::from_config(cfg).unwrap());
    let bank = SnapshotBank::from_truth(&problem, &problem.domain.linspace(eim_train), &NewtonSettings::default()).unwrap();
    let eim = eim_build(&bank, 1e-10, m_max).unwrap();
    let settings = GreedySettings {
        tol: 1e-9,
        n_max,
        ..Default::default()
    };
    pod_greedy(problem.clone(), &eim, &problem.domain.linspace(greedy_train), &settings).unwrap()
}

#[test]
fn infinite_tolerance_stops_at_one() {
    let mut cfg = ProblemConfig::magnetoquasistatic_1d();
    cfg.n_elem = 30;
    cfg.steps = 40;
    let problem = Arc::new(TruthProblem::from_config(&cfg).unwrap());
    let bank = SnapshotBank::from_truth(&problem, &problem.domain.linspace(6), &NewtonSettings::default()).unwrap();
    let eim = eim_build(&bank, 1e-10, 4).unwrap();
    let settings = GreedySettings {
        tol: f64::INFINITY,
        ..Default::default()
    };
    let model = pod_greedy(problem.clone(), &eim, &problem.domain.linspace(8), &settings).unwrap();
    assert_eq!(model.n(), 1);
}

#[test]
fn coarse_training_grids_still_give_rigorous_bounds() {
    let mut cfg = ProblemConfig::magnetoquasistatic_1d();
    cfg.n_elem = 50;
    cfg.steps = 100;
    let model = build(&cfg, 25, 50, 6, 4);
    let problem = model.problem.clone();
    let mus = test_parameters(1.0, 5.5, 30, 3);
    let truths = TruthBank::compute(&problem, &mus, &NewtonSettings::default()).unwrap();
    for (n, m) in [(2, 2), (3, 4), (4, 6)] {
        let (evals, failures) = evaluate(&model.truncated(n, m).unwrap(), &truths, &RunOptions::default());
        let row = summarize(n, m, &evals, failures);
        assert_eq!(row.failures, 0);
        assert_eq!(row.violations, 0, "({n}, {m}): {row:?}");
        assert!(row.mean_effectivity >= 1.0);
    }
}

#[test]
fn inexact_newton_converges_on_reference_configuration() {
    let model = build(&ProblemConfig::magnetoquasistatic_1d(), 40, 40, 8, 6);
    for mu in [1.0, 2.2, 3.7, 4.9, 5.5] {
        let inexact = rb_solve(&model, mu, &OnlineSettings::default()).unwrap();
        let exact = rb_solve(
            &model,
            mu,
            &OnlineSettings {
                jacobian: JacobianMode::Exact,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(inexact.newton_iters.iter().all(|&k| k <= 25));
        for (a, b) in inexact.coeffs.iter().zip(&exact.coeffs) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn effectivity_is_moderate_across_sizes() {
    let mut cfg = ProblemConfig::magnetoquasistatic_1d();
    cfg.n_elem = 60;
    cfg.steps = 100;
    let model = build(&cfg, 30, 40, 8, 5);
    let mus = test_parameters(1.0, 5.5, 20, 11);
    let truths = TruthBank::compute(&model.problem, &mus, &NewtonSettings::default()).unwrap();
    let mut last = f64::INFINITY;
    for n in 1..=5 {
        let (evals, failures) = evaluate(&model.truncated(n, 8).unwrap(), &truths, &RunOptions::default());
        let row = summarize(n, 8, &evals, failures);
        assert!(row.mean_effectivity >= 1.0 && row.mean_effectivity <= 20.0, "{row:?}");
        assert!(row.max_delta < last * 1.5, "estimator grew at N = {n}");
        last = row.max_delta;
    }
}
