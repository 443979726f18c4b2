//! Reduced solve with a posteriori certification, compared with the true error.
//!
//! Shows the split of the bound into the residual part and the interpolation part,
//! and both ways of obtaining the monotonicity constant.

use std::sync::Arc;

use rbcert::eim::{eim_build, SnapshotBank};
use rbcert::offline::{pod_greedy, GreedySettings};
use rbcert::online::{certify, rb_solve, true_error, MonotonicityMode, OnlineSettings};
use rbcert::truth::{truth_solve, NewtonSettings, ProblemConfig, TruthProblem};

fn main() -> rbcert::Result<()> {
    let problem = Arc::new(TruthProblem::from_config(&ProblemConfig::magnetoquasistatic_1d())?);
    let newton = NewtonSettings::default();
    let bank = SnapshotBank::from_truth(&problem, &problem.domain.linspace(100), &newton)?;
    let eim = eim_build(&bank, 1e-10, 8)?;
    let settings = GreedySettings {
        tol: 1e-6,
        n_max: 5,
        ..Default::default()
    };
    let model = pod_greedy(problem.clone(), &eim, &problem.domain.linspace(100), &settings)?;
    println!("(N, M) = ({}, {})", model.n(), model.m());
    println!("   mu     Delta        Delta_RB     Delta_EI     true error   eff    m_a(emp)");
    for mu in [1.0, 1.7, 2.9, 4.4, 5.5] {
        let traj = rb_solve(&model, mu, &OnlineSettings::default())?;
        let cert = certify(&model, &traj, MonotonicityMode::Analytic)?;
        let emp = certify(&model, &traj, MonotonicityMode::Empirical)?;
        let truth = truth_solve(&problem, mu, &newton)?;
        let err = true_error(&model, &truth, &traj)?;
        println!(
            "{mu:5.2}  {:.4e}  {:.4e}  {:.4e}  {err:.4e}  {:5.2}  {:.4}",
            cert.delta_total,
            cert.delta_rb,
            cert.delta_ei,
            cert.delta_total / err,
            emp.m_a
        );
    }
    Ok(())
}
