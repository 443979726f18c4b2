//! Reduced Newton with the frozen-coefficient Jacobian against the full reduced
//! Jacobian, plus a finite-difference check of the latter.

use std::sync::Arc;

use rbcert::eim::{eim_build, SnapshotBank};
use rbcert::offline::{pod_greedy, GreedySettings};
use rbcert::online::{rb_jacobian, rb_residual, rb_solve, JacobianMode, OnlineSettings};
use rbcert::truth::{NewtonSettings, ProblemConfig, TruthProblem};

fn main() -> rbcert::Result<()> {
    let problem = Arc::new(TruthProblem::from_config(&ProblemConfig::magnetoquasistatic_1d())?);
    let bank = SnapshotBank::from_truth(&problem, &problem.domain.linspace(60), &NewtonSettings::default())?;
    let eim = eim_build(&bank, 1e-10, 8)?;
    let settings = GreedySettings {
        tol: 1e-7,
        n_max: 5,
        ..Default::default()
    };
    let model = pod_greedy(problem.clone(), &eim, &problem.domain.linspace(60), &settings)?;

    println!("   mu    iterations (inexact / exact)   fallback steps   max coefficient difference");
    for mu in [1.0, 2.5, 4.0, 5.5] {
        let inexact = rb_solve(&model, mu, &OnlineSettings::default())?;
        let exact = rb_solve(
            &model,
            mu,
            &OnlineSettings {
                jacobian: JacobianMode::Exact,
                ..Default::default()
            },
        )?;
        let diff = inexact
            .coeffs
            .iter()
            .zip(&exact.coeffs)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0_f64, f64::max);
        println!(
            "{mu:5.2}   {:5} / {:5}                 {:3}              {diff:.2e}",
            inexact.newton_iters.iter().sum::<usize>(),
            exact.newton_iters.iter().sum::<usize>(),
            inexact.fallback_steps
        );
    }

    let traj = rb_solve(&model, 5.5, &OnlineSettings::default())?;
    let k = 100;
    let (u, up) = (&traj.coeffs[k], &traj.coeffs[k - 1]);
    let jac = rb_jacobian(&model, 5.5, k, u, JacobianMode::Exact)?;
    let h = 1e-6;
    let mut num = 0.0;
    for j in 0..model.n() {
        let mut a = u.clone();
        let mut b = u.clone();
        a[j] += h;
        b[j] -= h;
        let ra = rb_residual(&model, 5.5, k, &a, up)?;
        let rb = rb_residual(&model, 5.5, k, &b, up)?;
        for i in 0..model.n() {
            num += ((ra[i] - rb[i]) / (2.0 * h) - jac[(i, j)]).powi(2);
        }
    }
    println!("exact Jacobian vs central differences at k = {k}: relative Frobenius error {:.2e}", num.sqrt() / jac.norm());
    Ok(())
}
