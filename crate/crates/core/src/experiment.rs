//! Experiment driver: configuration files, the offline pipeline, parameter
//! studies, timing benchmarks and certificate sweeps. Every artifact written
//! here carries the configuration hash and the test-set seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eim::{eim_build, EimModel, SnapshotBank};
use crate::error::{Error, Result};
use crate::io::{load_json, save_json, sci, write_csv, write_trajectory_csv, TrajectoryHeader};
use crate::offline::{pod_greedy, GreedySettings, RbModel};
use crate::online::{
    certify, rb_solve, true_error, ErrorCertificate, MonotonicityMode, OnlineSettings, RbTrajectory,
};
use crate::truth::{truth_solve, NewtonSettings, ProblemConfig, TruthProblem, TruthTrajectory};

pub const EIM_MODEL_FILE: &str = "eim_model.json";
pub const RB_MODEL_FILE: &str = "rb_model.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EimConfig {
    /// Size of the uniform parameter grid whose truth trajectories feed the snapshot bank.
    pub train_size: usize,
    pub tol: f64,
    pub m_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyConfig {
    pub train_size: usize,
    /// Target estimator level.
    pub tol: f64,
    /// The greedy keeps enriching up to this size even after reaching `tol`.
    #[serde(default = "one")]
    pub n_min: usize,
    pub n_max: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub test_size: usize,
    pub seed: u64,
    /// `(N, M)` pairs of the summary table.
    pub table: Vec<(usize, usize)>,
    /// One convergence curve over `N = 1..=N_max` per listed `M`.
    pub curve_m: Vec<usize>,
    /// Parameter of the reluctivity profile at the final time.
    pub profile_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub repetitions: usize,
    pub n: usize,
    pub m: usize,
}

/// One experiment, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub newton: NewtonSettings,
    pub eim: EimConfig,
    pub greedy: GreedyConfig,
    pub study: StudyConfig,
    pub bench: BenchConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::reference_1d()
    }
}

impl ExperimentConfig {
    /// The 1-D magnetoquasistatic benchmark with its reference training and test sizes.
    pub fn reference_1d() -> Self {
        ExperimentConfig {
            output_dir: default_output_dir(),
            problem: ProblemConfig::magnetoquasistatic_1d(),
            newton: NewtonSettings::default(),
            eim: EimConfig {
                train_size: 200,
                tol: 1e-10,
                m_max: 8,
            },
            greedy: GreedyConfig {
                train_size: 400,
                tol: 1e-5,
                n_min: 7,
                n_max: 7,
            },
            study: StudyConfig {
                test_size: 200,
                seed: 20_200_907,
                table: vec![(2, 2), (3, 4), (5, 8)],
                curve_m: vec![1, 2, 4, 8],
                profile_mu: 5.5,
            },
            bench: BenchConfig {
                repetitions: 20,
                n: 5,
                m: 8,
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let p = &self.problem;
        if p.n_elem < 2 || p.steps == 0 {
            return bad(format!("need n_elem >= 2 and steps >= 1 (got {}, {})", p.n_elem, p.steps));
        }
        if !(p.t_final > 0.0 && p.t_final.is_finite()) {
            return bad(format!("t_final must be positive (got {})", p.t_final));
        }
        if !(p.mu_min.is_finite() && p.mu_max.is_finite() && p.mu_min <= p.mu_max) {
            return bad(format!("invalid parameter domain [{}, {}]", p.mu_min, p.mu_max));
        }
        self.newton.validate()?;
        let counts = [
            ("eim.train_size", self.eim.train_size),
            ("eim.m_max", self.eim.m_max),
            ("greedy.train_size", self.greedy.train_size),
            ("greedy.n_max", self.greedy.n_max),
            ("study.test_size", self.study.test_size),
            ("bench.repetitions", self.bench.repetitions),
        ];
        for (name, v) in counts {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        for (name, v) in [("eim.tol", self.eim.tol), ("greedy.tol", self.greedy.tol)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive (got {v})"));
            }
        }
        let fits = |n: usize, m: usize| n >= 1 && n <= self.greedy.n_max && m >= 1 && m <= self.eim.m_max;
        for &(n, m) in &self.study.table {
            if !fits(n, m) {
                return bad(format!("table entry ({n}, {m}) exceeds (N_max, M_max)"));
            }
        }
        if self.study.curve_m.iter().any(|&m| !fits(1, m)) {
            return bad("curve_m entries must lie in 1..=M_max".into());
        }
        if !fits(self.bench.n, self.bench.m) {
            return bad(format!("bench size ({}, {}) exceeds (N_max, M_max)", self.bench.n, self.bench.m));
        }
        if !(self.study.profile_mu >= p.mu_min && self.study.profile_mu <= p.mu_max) {
            return bad(format!("profile_mu {} outside the parameter domain", self.study.profile_mu));
        }
        Ok(())
    }

    /// SHA-256 over everything except the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn test_set(&self) -> Vec<f64> {
        test_parameters(self.problem.mu_min, self.problem.mu_max, self.study.test_size, self.study.seed)
    }

    fn meta(&self) -> Vec<(&'static str, String)> {
        vec![("config_hash", self.hash()), ("seed", self.study.seed.to_string())]
    }
}

/// Uniform random sample of `[lo, hi]` from a seeded ChaCha stream.
pub fn test_parameters(lo: f64, hi: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(lo..=hi)).collect()
}

/// Online choices shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub online: OnlineSettings,
    pub m_a_mode: MonotonicityMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EimArtifact {
    config_hash: String,
    seed: u64,
    model: EimModel,
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    Ok(cfg.output_dir.join(name))
}

/// Truth trajectory at `mu`, written as `truth_mu<mu>.csv`.
pub fn run_truth(cfg: &ExperimentConfig, mu: f64) -> Result<PathBuf> {
    let problem = TruthProblem::from_config(&cfg.problem)?;
    problem.domain.check(mu)?;
    let traj = truth_solve(&problem, mu, &cfg.newton)?;
    let path = out_path(cfg, &format!("truth_mu{mu}.csv"))?;
    let header = TrajectoryHeader {
        n_elem: cfg.problem.n_elem,
        steps: cfg.problem.steps,
        dt: problem.time.max_dt(),
        mu,
        config_hash: cfg.hash(),
        seed: cfg.study.seed,
    };
    write_trajectory_csv(&path, &header, &problem.time.t, &traj.states)?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct OfflineOutput {
    pub eim: EimModel,
    pub rb: RbModel,
    pub eim_seconds: f64,
    pub greedy_seconds: f64,
}

/// EIM on the training grid, then POD-Greedy. Writes both models and their logs.
pub fn run_offline(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<OfflineOutput> {
    let problem = Arc::new(TruthProblem::from_config(&cfg.problem)?);
    let t0 = Instant::now();
    let eim_train = problem.domain.linspace(cfg.eim.train_size);
    let bank = SnapshotBank::from_truth(&problem, &eim_train, &cfg.newton)?;
    let eim = eim_build(&bank, cfg.eim.tol, cfg.eim.m_max)?;
    drop(bank);
    let eim_seconds = t0.elapsed().as_secs_f64();
    log::info!("EIM: M = {} in {eim_seconds:.2} s", eim.dim());

    let t1 = Instant::now();
    let settings = GreedySettings {
        tol: cfg.greedy.tol,
        n_min: cfg.greedy.n_min,
        n_max: cfg.greedy.n_max,
        truth: cfg.newton,
        online: opts.online,
        m_a_mode: opts.m_a_mode,
    };
    let mut rb = pod_greedy(problem.clone(), &eim, &problem.domain.linspace(cfg.greedy.train_size), &settings)?;
    let greedy_seconds = t1.elapsed().as_secs_f64();
    log::info!("POD-Greedy: N = {} in {greedy_seconds:.2} s", rb.n());
    rb.metadata = cfg.meta().into_iter().map(|(k, v)| (k.to_string(), v)).collect();

    save_json(
        &out_path(cfg, EIM_MODEL_FILE)?,
        &EimArtifact {
            config_hash: cfg.hash(),
            seed: cfg.study.seed,
            model: eim.clone(),
        },
    )?;
    rb.save(&out_path(cfg, RB_MODEL_FILE)?)?;

    let eim_rows: Vec<Vec<String>> = eim
        .training_log
        .iter()
        .enumerate()
        .map(|(i, e)| vec![(i + 1).to_string(), sci(e.mu), e.step.to_string(), sci(e.max_residual)])
        .collect();
    write_csv(&out_path(cfg, "eim_log.csv")?, &cfg.meta(), &["M", "mu", "step", "max_residual"], &eim_rows)?;
    let greedy_rows: Vec<Vec<String>> = rb
        .greedy_log
        .entries
        .iter()
        .map(|e| {
            vec![
                e.basis_size.to_string(),
                sci(e.max_estimate),
                sci(e.argmax_mu),
                e.enriched.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out_path(cfg, "greedy_log.csv")?,
        &cfg.meta(),
        &["N", "max_estimate", "argmax_mu", "enriched"],
        &greedy_rows,
    )?;
    Ok(OfflineOutput {
        eim,
        rb,
        eim_seconds,
        greedy_seconds,
    })
}

pub fn load_eim_model(dir: &Path) -> Result<EimModel> {
    let artifact: EimArtifact = load_json(&dir.join(EIM_MODEL_FILE))?;
    Ok(artifact.model)
}

/// Loads the reduced model written by [`run_offline`] and checks it against `cfg`.
pub fn load_rb_model(cfg: &ExperimentConfig) -> Result<RbModel> {
    let rb = RbModel::load(&cfg.output_dir.join(RB_MODEL_FILE))?;
    if rb.problem.config.as_ref() != Some(&cfg.problem) {
        return Err(Error::Config(format!(
            "{} was built for a different problem configuration",
            cfg.output_dir.join(RB_MODEL_FILE).display()
        )));
    }
    Ok(rb)
}

/// Certified reduced solve at one parameter, compared with a stored truth trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mu: f64,
    pub certificate: ErrorCertificate,
    pub true_error: f64,
}

impl Evaluation {
    pub fn effectivity(&self) -> f64 {
        self.certificate.delta_total / self.true_error
    }

    /// `Delta >= true error` up to an absolute slack for round-off.
    pub fn is_bounded(&self, slack: f64) -> bool {
        self.certificate.delta_total >= self.true_error - slack
    }
}

/// Statistics of one `(N, M)` model over the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub m: usize,
    pub max_delta: f64,
    pub max_delta_rb: f64,
    pub max_delta_ei: f64,
    pub max_true_error: f64,
    pub mean_effectivity: f64,
    pub min_effectivity: f64,
    pub violations: usize,
    /// Parameters at which the reduced solve or its certification failed.
    pub failures: usize,
    pub n_test: usize,
}

pub const BOUND_SLACK: f64 = 1e-9;

/// Truth trajectories at the test parameters, computed once and shared by every `(N, M)`.
pub struct TruthBank {
    pub mus: Vec<f64>,
    pub trajectories: Vec<TruthTrajectory>,
}

impl TruthBank {
    pub fn compute(problem: &TruthProblem, mus: &[f64], newton: &NewtonSettings) -> Result<Self> {
        let trajectories = mus
            .par_iter()
            .map(|&mu| {
                truth_solve(problem, mu, newton).map_err(|e| Error::TruthSolve {
                        mu,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TruthBank {
            mus: mus.to_vec(),
            trajectories,
        })
    }
}

/// Certified solves of `model` at every test parameter; failed solves are dropped with a warning.
pub fn evaluate(model: &RbModel, truths: &TruthBank, opts: &RunOptions) -> (Vec<Evaluation>, usize) {
    let results: Vec<Option<Evaluation>> = truths
        .mus
        .par_iter()
        .zip(&truths.trajectories)
        .map(|(&mu, truth)| {
            let run = || -> Result<Evaluation> {
                let traj = rb_solve(model, mu, &opts.online)?;
                let certificate = certify(model, &traj, opts.m_a_mode)?;
                let true_error = true_error(model, truth, &traj)?;
                Ok(Evaluation {
                    mu,
                    certificate,
                    true_error,
                })
            };
            match run() {
                Ok(ev) => Some(ev),
                Err(e) => {
                    log::warn!("(N, M) = ({}, {}), mu = {mu}: {e}", model.n(), model.m());
                    None
                }
            }
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_none()).count();
    (results.into_iter().flatten().collect(), failures)
}

pub fn summarize(n: usize, m: usize, evals: &[Evaluation], failures: usize) -> StudyRow {
    let max = |f: &dyn Fn(&Evaluation) -> f64| evals.iter().map(f).fold(f64::NAN, f64::max);
    let eff: Vec<f64> = evals.iter().map(Evaluation::effectivity).collect();
    StudyRow {
        n,
        m,
        max_delta: max(&|e| e.certificate.delta_total),
        max_delta_rb: max(&|e| e.certificate.delta_rb),
        max_delta_ei: max(&|e| e.certificate.delta_ei),
        max_true_error: max(&|e| e.true_error),
        mean_effectivity: eff.iter().sum::<f64>() / eff.len() as f64,
        min_effectivity: eff.iter().cloned().fold(f64::NAN, f64::min),
        violations: evals.iter().filter(|e| !e.is_bounded(BOUND_SLACK)).count(),
        failures,
        n_test: evals.len() + failures,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub table: Vec<StudyRow>,
    /// Keyed by `M`; rows for `N = 1..=N_max`.
    pub curves: BTreeMap<usize, Vec<StudyRow>>,
    /// Smallest `N` at `M_max` whose max estimate is within the greedy tolerance.
    pub first_within_tol: Option<(usize, usize)>,
}

const ROW_COLUMNS: [&str; 11] = [
    "N",
    "M",
    "max_delta",
    "max_delta_rb",
    "max_delta_ei",
    "max_true_error",
    "mean_effectivity",
    "min_effectivity",
    "violations",
    "failures",
    "n_test",
];

fn row_cells(r: &StudyRow) -> Vec<String> {
    vec![
        r.n.to_string(),
        r.m.to_string(),
        sci(r.max_delta),
        sci(r.max_delta_rb),
        sci(r.max_delta_ei),
        sci(r.max_true_error),
        sci(r.mean_effectivity),
        sci(r.min_effectivity),
        r.violations.to_string(),
        r.failures.to_string(),
        r.n_test.to_string(),
    ]
}

/// Table, convergence curves, per-parameter results of the last table entry and the
/// reluctivity profile. Uses the stored model only, truncated to each `(N, M)`.
pub fn run_study(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<StudyResult> {
    let full = load_rb_model(cfg)?;
    let mus = cfg.test_set();
    let truths = TruthBank::compute(&full.problem, &mus, &cfg.newton)?;
    let meta = cfg.meta();

    let mut table = Vec::new();
    let mut last_evals = Vec::new();
    for &(n, m) in &cfg.study.table {
        let model = full.truncated(n, m)?;
        let (evals, failures) = evaluate(&model, &truths, opts);
        let row = summarize(n, m, &evals, failures);
        log::info!(
            "(N, M) = ({n}, {m}): max Delta {:.3e}, max error {:.3e}, mean effectivity {:.2}",
            row.max_delta,
            row.max_true_error,
            row.mean_effectivity
        );
        table.push(row);
        last_evals = evals;
    }
    let rows: Vec<Vec<String>> = table.iter().map(row_cells).collect();
    write_csv(&out_path(cfg, "study_table.csv")?, &meta, &ROW_COLUMNS, &rows)?;

    let mut sorted = last_evals.clone();
    sorted.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let per_mu: Vec<Vec<String>> = sorted
        .iter()
        .map(|e| {
            vec![
                sci(e.mu),
                sci(e.certificate.delta_total),
                sci(e.certificate.delta_rb),
                sci(e.certificate.delta_ei),
                sci(e.true_error),
                sci(e.effectivity()),
            ]
        })
        .collect();
    write_csv(
        &out_path(cfg, "study_per_mu.csv")?,
        &meta,
        &["mu", "delta", "delta_rb", "delta_ei", "true_error", "effectivity"],
        &per_mu,
    )?;

    let mut curves = BTreeMap::new();
    for &m in &cfg.study.curve_m {
        let mut rows = Vec::new();
        for n in 1..=full.n() {
            let (evals, failures) = evaluate(&full.truncated(n, m)?, &truths, opts);
            rows.push(summarize(n, m, &evals, failures));
        }
        let cells: Vec<Vec<String>> = rows.iter().map(row_cells).collect();
        write_csv(&out_path(cfg, &format!("convergence_M{m}.csv"))?, &meta, &ROW_COLUMNS, &cells)?;
        curves.insert(m, rows);
    }

    let first_within_tol = curves
        .get(&full.m())
        .and_then(|rows| rows.iter().find(|r| r.max_delta <= cfg.greedy.tol))
        .map(|r| (r.n, r.m));

    if let Some(&(n, m)) = cfg.study.table.last() {
        write_profile(cfg, &full.truncated(n, m)?, opts)?;
    }
    Ok(StudyResult {
        table,
        curves,
        first_within_tol,
    })
}

/// `nu(|u_N'|)` and its interpolant on every element at the final time.
fn write_profile(cfg: &ExperimentConfig, model: &RbModel, opts: &RunOptions) -> Result<()> {
    let mu = cfg.study.profile_mu;
    let traj = rb_solve(model, mu, &opts.online)?;
    let k = traj.coeffs.len() - 1;
    let nl = model.problem.nonlinearity.as_ref();
    let mesh = &model.problem.mesh;
    let rows: Vec<Vec<String>> = (0..mesh.n_elem)
        .map(|e| {
            let grad: f64 = traj.coeffs[k]
                .iter()
                .zip(&model.basis_gradients)
                .map(|(c, g)| c * g[e])
                .sum();
            let x = mesh.elem_midpoints[e];
            vec![
                sci(x),
                sci(grad.abs()),
                sci(nl.value(grad.abs(), mu)),
                sci(model.eim.eval_at(&traj.eim_coeffs[k], e)),
            ]
        })
        .collect();
    let mut meta = cfg.meta();
    meta.push(("mu", sci(mu)));
    meta.push(("t", sci(model.problem.time.t[k])));
    write_csv(&out_path(cfg, "nu_profile.csv")?, &meta, &["x", "abs_grad", "nu", "nu_eim"], &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub n: usize,
    pub m: usize,
    pub repetitions: usize,
    pub truth_mean: f64,
    pub rb_mean: f64,
    pub certified_mean: f64,
    pub truth_median: f64,
    pub rb_median: f64,
    pub certified_median: f64,
}

impl BenchResult {
    pub fn speedup(&self) -> f64 {
        self.truth_mean / self.rb_mean
    }

    pub fn speedup_certified(&self) -> f64 {
        self.truth_mean / self.certified_mean
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Wall times of truth solve, reduced solve and certified reduced solve, interleaved
/// over the first test parameters after one warm-up round.
pub fn bench_model(model: &RbModel, mus: &[f64], repetitions: usize, newton: &NewtonSettings, opts: &RunOptions) -> Result<BenchResult> {
    if mus.is_empty() || repetitions == 0 {
        return Err(Error::InvalidInput("benchmark needs parameters and repetitions".into()));
    }
    let problem = &model.problem;
    let certified = |mu: f64| -> Result<(RbTrajectory, ErrorCertificate)> {
        let traj = rb_solve(model, mu, &opts.online)?;
        let cert = certify(model, &traj, opts.m_a_mode)?;
        Ok((traj, cert))
    };
    truth_solve(problem, mus[0], newton)?;
    certified(mus[0])?;
    let mut times = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..repetitions {
        let mu = mus[i % mus.len()];
        let t = Instant::now();
        std::hint::black_box(truth_solve(problem, mu, newton)?);
        times[0].push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        std::hint::black_box(rb_solve(model, mu, &opts.online)?);
        times[1].push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        std::hint::black_box(certified(mu)?);
        times[2].push(t.elapsed().as_secs_f64());
    }
    Ok(BenchResult {
        n: model.n(),
        m: model.m(),
        repetitions,
        truth_mean: mean(&times[0]),
        rb_mean: mean(&times[1]),
        certified_mean: mean(&times[2]),
        truth_median: median(&times[0]),
        rb_median: median(&times[1]),
        certified_median: median(&times[2]),
    })
}

pub fn run_bench(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<BenchResult> {
    let model = load_rb_model(cfg)?.truncated(cfg.bench.n, cfg.bench.m)?;
    let res = bench_model(&model, &cfg.test_set(), cfg.bench.repetitions, &cfg.newton, opts)?;
    let rows = vec![
        vec!["truth".into(), sci(res.truth_mean), sci(res.truth_median), sci(1.0)],
        vec!["rb".into(), sci(res.rb_mean), sci(res.rb_median), sci(res.speedup())],
        vec!["rb_certified".into(), sci(res.certified_mean), sci(res.certified_median), sci(res.speedup_certified())],
    ];
    let mut meta = cfg.meta();
    meta.push(("N", res.n.to_string()));
    meta.push(("M", res.m.to_string()));
    meta.push(("repetitions", res.repetitions.to_string()));
    write_csv(
        &out_path(cfg, "bench.csv")?,
        &meta,
        &["method", "mean_seconds", "median_seconds", "speedup"],
        &rows,
    )?;
    Ok(res)
}

/// Certificates of the stored model at `mu`, or over the whole test set when `mu` is `None`.
pub fn run_certify(cfg: &ExperimentConfig, opts: &RunOptions, mu: Option<f64>) -> Result<Vec<(ErrorCertificate, RbTrajectory)>> {
    let model = load_rb_model(cfg)?;
    let mus = match mu {
        Some(mu) => {
            model.problem.domain.check(mu)?;
            vec![mu]
        }
        None => cfg.test_set(),
    };
    let results = mus
        .par_iter()
        .map(|&mu| {
            let traj = rb_solve(&model, mu, &opts.online)?;
            let cert = certify(&model, &traj, opts.m_a_mode)?;
            Ok((cert, traj))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(c, t)| {
            vec![
                sci(c.mu),
                model.n().to_string(),
                model.m().to_string(),
                sci(c.delta_total),
                sci(c.delta_rb),
                sci(c.delta_ei),
                sci(c.residual_dual_norm),
                sci(c.delta_m),
                sci(c.u_norm_l2v),
                sci(c.m_a),
                sci(c.min_interpolated_weight),
                t.newton_iters.iter().sum::<usize>().to_string(),
                t.fallback_steps.to_string(),
            ]
        })
        .collect();
    let name = match mu {
        Some(mu) => format!("certificate_mu{mu}.csv"),
        None => "certificates.csv".to_string(),
    };
    write_csv(
        &out_path(cfg, &name)?,
        &cfg.meta(),
        &[
            "mu",
            "N",
            "M",
            "delta",
            "delta_rb",
            "delta_ei",
            "residual_dual_norm",
            "delta_m",
            "u_norm_l2v",
            "m_a",
            "min_interpolated_weight",
            "newton_iterations",
            "fallback_steps",
        ],
        &rows,
    )?;
    Ok(results)
}
