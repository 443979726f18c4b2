//! Empirical interpolation of the reluctivity field from truth snapshots.
//!
//! Prints the greedy residual decay, the selected elements and checks that the
//! interpolant reproduces each selected field at the interpolation points.

use rbcert::eim::{eim_build, eim_interpolate, SnapshotBank};
use rbcert::truth::{NewtonSettings, ProblemConfig, TruthProblem};

fn main() -> rbcert::Result<()> {
    let problem = TruthProblem::from_config(&ProblemConfig::magnetoquasistatic_1d())?;
    let train = problem.domain.linspace(50);
    let bank = SnapshotBank::from_truth(&problem, &train, &NewtonSettings::default())?;
    println!("{} snapshot fields of length {}", bank.len(), problem.mesh.n_elem);

    let eim = eim_build(&bank, 1e-10, 8)?;
    println!(" M   element   max residual before   from (mu, k)");
    for (m, (log, idx)) in eim.training_log.iter().zip(&eim.interp_indices).enumerate() {
        println!("{:2}   {idx:7}   {:.4e}            ({:.3}, {})", m + 1, log.max_residual, log.mu, log.step);
    }

    let mut worst: f64 = 0.0;
    for log in &eim.training_log {
        let field = &bank.entries[log.bank_index].values;
        let interp = eim_interpolate(&eim, field)?;
        for &e in &eim.interp_indices {
            worst = worst.max((interp[e] - field[e]).abs());
        }
    }
    println!("max error at interpolation points over selected fields: {worst:.2e}");

    let lower = (0..eim.dim()).all(|i| eim.b(i, i) == 1.0 && (i + 1..eim.dim()).all(|j| eim.b(i, j) == 0.0));
    println!("B lower triangular with unit diagonal: {lower}");
    Ok(())
}
