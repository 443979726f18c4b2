//! Full experiment through the driver API: offline models, the (N, M) table and
//! convergence curves on a random test set, and timings. Artifacts go to a temporary
//! directory unless one is given.
//!
//! cargo run --release --example study [out_dir]

use std::path::PathBuf;

use rbcert::experiment::{run_bench, run_offline, run_study, ExperimentConfig, RunOptions};

fn main() -> rbcert::Result<()> {
    let mut cfg = ExperimentConfig::reference_1d();
    cfg.output_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rbcert_study"));
    let opts = RunOptions::default();

    let off = run_offline(&cfg, &opts)?;
    println!("offline: EIM {:.1} s, greedy {:.1} s, N = {}, M = {}", off.eim_seconds, off.greedy_seconds, off.rb.n(), off.rb.m());

    let study = run_study(&cfg, &opts)?;
    println!("(N, M)   max Delta    Delta_RB     Delta_EI     max error    mean eff");
    for r in &study.table {
        println!(
            "({}, {})   {:.3e}    {:.3e}    {:.3e}    {:.3e}    {:.2}",
            r.n, r.m, r.max_delta, r.max_delta_rb, r.max_delta_ei, r.max_true_error, r.mean_effectivity
        );
    }
    for (m, rows) in &study.curves {
        let deltas: Vec<String> = rows.iter().map(|r| format!("{:.1e}", r.max_delta)).collect();
        println!("M = {m}: max Delta over N = {}", deltas.join(" "));
    }

    let bench = run_bench(&cfg, &opts)?;
    println!(
        "speed-up over {} runs: {:.2} without, {:.2} with certification",
        bench.repetitions,
        bench.speedup(),
        bench.speedup_certified()
    );
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(())
}
