//! Offline stage: EIM followed by POD-Greedy, then a save/load roundtrip.

use std::sync::Arc;

use rbcert::eim::{eim_build, SnapshotBank};
use rbcert::offline::{pod_greedy, GreedySettings, RbModel};
use rbcert::truth::{NewtonSettings, ProblemConfig, TruthProblem};

fn main() -> rbcert::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let problem = Arc::new(TruthProblem::from_config(&ProblemConfig::magnetoquasistatic_1d())?);
    let bank = SnapshotBank::from_truth(&problem, &problem.domain.linspace(200), &NewtonSettings::default())?;
    let eim = eim_build(&bank, 1e-10, 8)?;
    drop(bank);

    let settings = GreedySettings {
        tol: 1e-5,
        n_max: 7,
        ..Default::default()
    };
    let model = pod_greedy(problem.clone(), &eim, &problem.domain.linspace(400), &settings)?;
    println!("initial basis: {:?}", model.greedy_log.init);
    println!(" N   max estimate   argmax mu");
    for e in &model.greedy_log.entries {
        println!("{:2}   {:.4e}     {:.4}{}", e.basis_size, e.max_estimate, e.argmax_mu, if e.enriched { "" } else { "  (stop)" });
    }
    println!("reduced dimensions: N = {}, M = {}, Riesz terms = {}", model.n(), model.m(), model.riesz.len());

    let dir = std::env::temp_dir().join("rbcert_offline_example");
    std::fs::create_dir_all(&dir).map_err(|e| rbcert::Error::Config(e.to_string()))?;
    let path = dir.join("rb_model.json");
    model.save(&path)?;
    let back = RbModel::load(&path)?;
    println!("saved to {} and reloaded (N = {}, M = {})", path.display(), back.n(), back.m());
    Ok(())
}
