use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rbcert::experiment::{self, ExperimentConfig, RunOptions};
use rbcert::online::{JacobianMode, MonotonicityMode, OnlineSettings};
use rbcert::Error;

#[derive(Parser)]
#[command(name = "rbcert", version, about = "Certified reduced basis solver for nonlinear parabolic problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full finite element problem at one parameter and write the trajectory.
    Truth(Common),
    /// Build the EIM and reduced basis models.
    Offline(Common),
    /// Evaluate the stored model on the test set: table, convergence curves, profiles.
    Study(Common),
    /// Time truth, reduced and certified reduced solves.
    Bench(Common),
    /// Certify the stored model at one parameter (or the whole test set).
    Certify(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum MaMode {
    Analytic,
    Empirical,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML). Defaults to the built-in 1-D benchmark.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    /// Output directory; overrides the one in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parameter sweeps.
    #[arg(long)]
    workers: Option<usize>,
    /// Test-set seed; overrides the one in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Newton with the full reduced Jacobian instead of the frozen-coefficient one.
    #[arg(long)]
    exact_jacobian: bool,
    #[arg(long, value_enum, default_value = "analytic")]
    m_a_mode: MaMode,
}

impl Common {
    fn setup(&self) -> Result<(ExperimentConfig, RunOptions), Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::reference_1d(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.study.seed = seed;
        }
        if let Some(workers) = self.workers {
            if workers == 0 {
                return Err(Error::Config("--workers must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build_global()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        let opts = RunOptions {
            online: OnlineSettings {
                newton: cfg.newton,
                jacobian: if self.exact_jacobian {
                    JacobianMode::Exact
                } else {
                    JacobianMode::Inexact
                },
                ..Default::default()
            },
            m_a_mode: match self.m_a_mode {
                MaMode::Analytic => MonotonicityMode::Analytic,
                MaMode::Empirical => MonotonicityMode::Empirical,
            },
        };
        Ok((cfg, opts))
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Truth(c) => {
            let (cfg, _) = c.setup()?;
            let mu = c
                .mu
                .ok_or_else(|| Error::Config("truth needs --mu".into()))?;
            let path = experiment::run_truth(&cfg, mu)?;
            println!("wrote {}", path.display());
        }
        Command::Offline(c) => {
            let (cfg, opts) = c.setup()?;
            let out = experiment::run_offline(&cfg, &opts)?;
            println!(
                "EIM M = {} ({:.2} s), reduced basis N = {} ({:.2} s), written to {}",
                out.eim.dim(),
                out.eim_seconds,
                out.rb.n(),
                out.greedy_seconds,
                cfg.output_dir.display()
            );
        }
        Command::Study(c) => {
            let (cfg, opts) = c.setup()?;
            let res = experiment::run_study(&cfg, &opts)?;
            println!("  N  M   max Delta    max error    mean eff  violations");
            for r in &res.table {
                println!(
                    "{:3}{:3}  {:.4e}  {:.4e}  {:8.3}  {}",
                    r.n, r.m, r.max_delta, r.max_true_error, r.mean_effectivity, r.violations
                );
            }
            match res.first_within_tol {
                Some((n, m)) => println!("tolerance {:e} first reached at (N, M) = ({n}, {m})", cfg.greedy.tol),
                None => println!("tolerance {:e} not reached", cfg.greedy.tol),
            }
        }
        Command::Bench(c) => {
            let (cfg, opts) = c.setup()?;
            let r = experiment::run_bench(&cfg, &opts)?;
            println!(
                "(N, M) = ({}, {}), {} runs: truth {:.3e} s, reduced {:.3e} s, certified {:.3e} s; speed-up {:.2} / {:.2}",
                r.n,
                r.m,
                r.repetitions,
                r.truth_mean,
                r.rb_mean,
                r.certified_mean,
                r.speedup(),
                r.speedup_certified()
            );
        }
        Command::Certify(c) => {
            let (cfg, opts) = c.setup()?;
            let res = experiment::run_certify(&cfg, &opts, c.mu)?;
            for (cert, _) in res.iter().take(10) {
                println!(
                    "mu = {:.6}: Delta = {:.4e} (RB {:.4e}, EI {:.4e})",
                    cert.mu, cert.delta_total, cert.delta_rb, cert.delta_ei
                );
            }
            if res.len() > 10 {
                println!("... {} more in {}", res.len() - 10, cfg.output_dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ParameterOutOfDomain { .. } | Error::Config(_) | Error::InvalidInput(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
