//! Full finite element / Crank-Nicolson solve at a few parameters.
//!
//! cargo run --release --example truth_solve [mu ...]

use rbcert::fem::elem_gradient;
use rbcert::truth::{truth_solve, NewtonSettings, ProblemConfig, TruthProblem};

fn main() -> rbcert::Result<()> {
    let cfg = ProblemConfig::magnetoquasistatic_1d();
    let problem = TruthProblem::from_config(&cfg)?;
    let mut mus: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if mus.is_empty() {
        mus = vec![1.0, 3.25, 5.5];
    }
    println!("n_elem = {}, dofs = {}, K = {}, dt = {:e}", cfg.n_elem, problem.n_dof(), cfg.steps, problem.time.max_dt());
    for mu in mus {
        let t0 = std::time::Instant::now();
        let traj = truth_solve(&problem, mu, &NewtonSettings::default())?;
        let elapsed = t0.elapsed();
        let last = traj.states.last().unwrap();
        let max_u = last.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let grad = elem_gradient(&problem.mesh, last);
        let max_nu = problem
            .nonlinearity_field(last, mu)
            .into_iter()
            .fold(0.0_f64, f64::max);
        println!(
            "mu = {mu:<5} |u(T)|_max = {max_u:.5e}  |u'(T)|_max = {:.4}  max nu = {max_nu:.4}  newton its/step <= {}  ({elapsed:.2?})",
            grad.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
            traj.newton_iters.iter().max().unwrap()
        );
    }
    Ok(())
}
