//! Acceptance checks on the reference 1-D configuration. Prints one PASS/FAIL line
//! per criterion and exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbcert::eim::{eim_build, eim_coefficients, eim_interpolate, EimModel, SnapshotBank};
use rbcert::experiment::{bench_model, run_offline, run_study, ExperimentConfig, RunOptions, StudyResult, BOUND_SLACK};
use rbcert::fem::{elem_gradient, weighted_stiffness, Mesh1D};
use rbcert::linalg::dot;
use rbcert::offline::{pod_greedy, GreedyLog, GreedySettings, RbBasis, RbModel};
use rbcert::online::{
    lift, rb_jacobian, rb_residual, rb_solve, residual_dual_norm, JacobianMode, NonlinearityTreatment,
    OnlineSettings, RbTrajectory,
};
use rbcert::truth::{
    assemble_jacobian, assemble_residual, truth_solve, InitialCondition, NewtonSettings, ParamDomain, ProblemConfig,
    Reluctivity, SourceTerm, TimeGrid, TruthProblem,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&Context) -> Outcome);

struct Context {
    cfg: ExperimentConfig,
    eim: EimModel,
    bank: SnapshotBank,
    full: RbModel,
    study: StudyResult,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn setup() -> Context {
    let dir = std::env::temp_dir().join(format!("rbcert_acceptance_{}", std::process::id()));
    let mut cfg = ExperimentConfig::reference_1d();
    cfg.output_dir = dir;
    let opts = RunOptions::default();
    let t0 = Instant::now();
    let off = run_offline(&cfg, &opts).expect("offline stage");
    let study = run_study(&cfg, &opts).expect("study");
    eprintln!("offline + study in {:.1} s ({})", t0.elapsed().as_secs_f64(), cfg.output_dir.display());
    let problem = off.rb.problem.clone();
    let bank = SnapshotBank::from_truth(&problem, &problem.domain.linspace(cfg.eim.train_size), &cfg.newton)
        .expect("snapshot bank");
    let _ = std::fs::remove_dir_all(&cfg.output_dir);
    Context {
        cfg,
        eim: off.eim,
        bank,
        full: off.rb,
        study,
    }
}

fn row(ctx: &Context, n: usize, m: usize) -> &rbcert::experiment::StudyRow {
    ctx.study.table.iter().find(|r| r.n == n && r.m == m).expect("table row")
}

fn table_reproduction(ctx: &Context) -> Outcome {
    let r = row(ctx, 5, 8);
    check(
        (1e-6..=5e-5).contains(&r.max_delta) && (3e-7..=2e-5).contains(&r.max_true_error) && r.failures == 0,
        format!("(5,8): max Delta {:.3e} in [1e-6, 5e-5], max error {:.3e} in [3e-7, 2e-5]", r.max_delta, r.max_true_error),
    )
}

fn bound_rigor(ctx: &Context) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, m) in [(2, 2), (3, 4), (5, 8)] {
        let r = row(ctx, n, m);
        ok &= r.violations == 0 && r.failures == 0 && r.n_test == ctx.cfg.study.test_size;
        parts.push(format!("({n},{m}) {} violations / {} failures of {}", r.violations, r.failures, r.n_test));
    }
    check(ok, format!("{} (slack {BOUND_SLACK:e})", parts.join(", ")))
}

fn effectivities(ctx: &Context) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, m) in [(2, 2), (3, 4), (5, 8)] {
        let eff = row(ctx, n, m).mean_effectivity;
        ok &= (1.0..=20.0).contains(&eff);
        parts.push(format!("({n},{m}) {eff:.2}"));
    }
    check(ok, format!("mean effectivity {}", parts.join(", ")))
}

fn oracle_equivalence(ctx: &Context) -> Outcome {
    let problem = ctx.full.problem.clone();
    let n = problem.n_dof();
    let unit: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let basis = RbBasis::orthonormalize(&unit, &problem.v_gram);
    if basis.dim() != n {
        return Err(format!("full basis has dimension {} instead of {n}", basis.dim()));
    }
    let model = RbModel::from_basis(problem.clone(), ctx.eim.clone(), basis, GreedyLog::supplied()).map_err(|e| e.to_string())?;
    let settings = OnlineSettings {
        newton: ctx.cfg.newton,
        jacobian: JacobianMode::Exact,
        treatment: NonlinearityTreatment::Exact,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let mu = rng.random_range(1.0..=5.5);
        let traj = rb_solve(&model, mu, &settings).map_err(|e| e.to_string())?;
        let truth = truth_solve(&problem, mu, &ctx.cfg.newton).map_err(|e| e.to_string())?;
        for (a, b) in lift(&model, &traj).iter().zip(&truth.states) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    check(worst < 1e-7, format!("max nodal difference {worst:.3e} < 1e-7 over 5 parameters"))
}

fn frobenius_rel(fd: &[Vec<f64>], jac: impl Fn(usize, usize) -> f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, r) in fd.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            num += (v - jac(i, j)).powi(2);
            den += jac(i, j).powi(2);
        }
    }
    (num / den).sqrt()
}

fn jacobians(ctx: &Context) -> Outcome {
    let model = ctx.full.truncated(5, 8).map_err(|e| e.to_string())?;
    let problem = model.problem.clone();
    let steps = problem.time.steps();
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_rb, mut worst_truth): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let mu = rng.random_range(1.0..=5.5);
        let k = rng.random_range(1..=steps);

        let traj = rb_solve(&model, mu, &OnlineSettings::default()).map_err(|e| e.to_string())?;
        let u: Vec<f64> = traj.coeffs[k].iter().map(|x| x * (1.0 + 0.1 * rng.random_range(-1.0..1.0))).collect();
        let up = &traj.coeffs[k - 1];
        let jac = rb_jacobian(&model, mu, k, &u, JacobianMode::Exact).map_err(|e| e.to_string())?;
        let n = u.len();
        let mut fd = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut a = u.clone();
            let mut b = u.clone();
            a[j] += h;
            b[j] -= h;
            let ra = rb_residual(&model, mu, k, &a, up).map_err(|e| e.to_string())?;
            let rb = rb_residual(&model, mu, k, &b, up).map_err(|e| e.to_string())?;
            for i in 0..n {
                fd[i][j] = (ra[i] - rb[i]) / (2.0 * h);
            }
        }
        worst_rb = worst_rb.max(frobenius_rel(&fd, |i, j| jac[(i, j)]));

        let truth = truth_solve(&problem, mu, &NewtonSettings::default()).map_err(|e| e.to_string())?;
        let u = &truth.states[k];
        let up = &truth.states[k - 1];
        let jac = assemble_jacobian(&problem, u, k, mu).map_err(|e| e.to_string())?.to_dense();
        let n = u.len();
        let mut fd = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut a = u.clone();
            let mut b = u.clone();
            a[j] += h;
            b[j] -= h;
            let ra = assemble_residual(&problem, &a, up, k, mu).map_err(|e| e.to_string())?;
            let rb = assemble_residual(&problem, &b, up, k, mu).map_err(|e| e.to_string())?;
            for i in 0..n {
                fd[i][j] = (ra[i] - rb[i]) / (2.0 * h);
            }
        }
        worst_truth = worst_truth.max(frobenius_rel(&fd, |i, j| jac[(i, j)]));
    }
    check(
        worst_rb < 1e-5 && worst_truth < 1e-5,
        format!("relative Frobenius error: reduced {worst_rb:.2e}, full {worst_truth:.2e} (10 states, eps 1e-6)"),
    )
}

fn heat(n_elem: usize, steps: usize, t_final: f64, nu: f64, source: SourceTerm) -> TruthProblem {
    TruthProblem::new(
        Mesh1D::uniform(n_elem).unwrap(),
        TimeGrid::uniform(steps, t_final).unwrap(),
        Arc::new(Reluctivity::Constant { value: nu }),
        source,
        InitialCondition::Function(Arc::new(|x| (std::f64::consts::PI * x).sin())),
        ParamDomain::new(1.0, 1.0).unwrap(),
    )
}

fn temporal_order(_: &Context) -> Outcome {
    let (n_elem, t_final, nu) = (32, 0.5, 1.0);
    let settings = NewtonSettings { tol: 1e-10, max_iter: 5 };
    let source = || {
        SourceTerm::single(
            Arc::new(|t, _| (2.0 * std::f64::consts::PI * t).sin()),
            Arc::new(|x| 12.0 * (2.0 * std::f64::consts::PI * x).sin()),
        )
    };
    let reference = truth_solve(&heat(n_elem, 10240, t_final, nu, source()), 1.0, &settings).map_err(|e| e.to_string())?;
    let u_ref = reference.states.last().unwrap().clone();
    let mut errors = Vec::new();
    for steps in [10, 20, 40, 80, 160] {
        let p = heat(n_elem, steps, t_final, nu, source());
        let traj = truth_solve(&p, 1.0, &settings).map_err(|e| e.to_string())?;
        let d: Vec<f64> = traj.states[steps].iter().zip(&u_ref).map(|(a, b)| a - b).collect();
        errors.push(p.mass.bilinear(&d, &d).sqrt());
    }
    let rates: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    check(
        rates.iter().all(|r| (r - 2.0).abs() <= 0.2),
        format!("observed rates {}", rates.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")),
    )
}

fn affine_reconstruction(ctx: &Context) -> Outcome {
    let model = &ctx.full;
    let problem = &model.problem;
    let eim = &model.eim;
    let blocks: Vec<_> = eim
        .basis
        .iter()
        .map(|q| weighted_stiffness(&problem.mesh, q).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_h, mut worst_n): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let mu = rng.random_range(1.0..=5.5);
        let truth = truth_solve(problem, mu, &NewtonSettings::default()).map_err(|e| e.to_string())?;
        let k = rng.random_range(0..truth.states.len());
        let g = elem_gradient(&problem.mesh, &truth.states[k]);
        let vals: Vec<f64> = eim.interp_indices.iter().map(|&e| problem.nonlinearity.value(g[e].abs(), mu)).collect();
        let phi = eim_coefficients(eim, &vals).map_err(|e| e.to_string())?;
        let nu_m: Vec<f64> = (0..problem.mesh.n_elem).map(|e| eim.eval_at(&phi, e)).collect();
        let direct = weighted_stiffness(&problem.mesh, &nu_m).map_err(|e| e.to_string())?.to_dense();
        let mut combo = blocks[0].to_dense() * 0.0;
        for (p, b) in phi.iter().zip(&blocks) {
            combo += b.to_dense() * *p;
        }
        worst_h = worst_h.max((&combo - &direct).amax() / direct.amax());

        let mut reduced = model.ops.eim_blocks[0].clone() * 0.0;
        for (p, b) in phi.iter().zip(&model.ops.eim_blocks) {
            reduced += b * *p;
        }
        let n = model.n();
        let mut projected = reduced.clone();
        for i in 0..n {
            let ai = direct.clone() * nalgebra::DVector::from_column_slice(&model.basis.vectors[i]);
            for j in 0..n {
                projected[(j, i)] = dot(&model.basis.vectors[j], ai.as_slice());
            }
        }
        worst_n = worst_n.max((&reduced - &projected).amax() / projected.amax());
    }
    check(
        worst_h <= 1e-12 && worst_n <= 1e-12,
        format!("max entrywise deviation relative to largest entry: full {worst_h:.2e}, reduced {worst_n:.2e}"),
    )
}

fn direct_dual_norm(model: &RbModel, traj: &RbTrajectory) -> f64 {
    let p = &model.problem;
    let chol = p.v_gram.cholesky().unwrap();
    let lifted = lift(model, traj);
    let weights = |phi: &[f64]| (0..p.mesh.n_elem).map(|e| model.eim.eval_at(phi, e)).collect::<Vec<_>>();
    let mut sq = 0.0;
    for k in 1..=p.time.steps() {
        let dt = p.time.dt(k);
        let a = weighted_stiffness(&p.mesh, &weights(&traj.eim_coeffs[k])).unwrap().mul_vec(&lifted[k]);
        let ap = weighted_stiffness(&p.mesh, &weights(&traj.eim_coeffs[k - 1])).unwrap().mul_vec(&lifted[k - 1]);
        let d: Vec<f64> = lifted[k].iter().zip(&lifted[k - 1]).map(|(x, y)| x - y).collect();
        let md = p.mass.mul_vec(&d);
        let g = p.source_vector(p.time.t[k], traj.mu);
        let gp = p.source_vector(p.time.t[k - 1], traj.mu);
        let r: Vec<f64> = (0..p.n_dof())
            .map(|i| 0.5 * (g[i] + gp[i]) - 0.5 * (a[i] + ap[i]) - md[i] / dt)
            .collect();
        sq += dt * dot(&r, &chol.solve(&r));
    }
    sq.sqrt()
}

fn riesz_agreement(ctx: &Context) -> Outcome {
    let model = ctx.full.truncated(5, 8).map_err(|e| e.to_string())?;
    let steps = model.problem.time.steps();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let traj = RbTrajectory {
            mu: rng.random_range(1.0..=5.5),
            coeffs: (0..=steps).map(|_| (0..model.n()).map(|_| rng.random_range(-0.2..0.2)).collect()).collect(),
            eim_coeffs: (0..=steps).map(|_| (0..model.m()).map(|_| rng.random_range(-3.0..3.0)).collect()).collect(),
            newton_iters: vec![0; steps],
            fallback_steps: 0,
        };
        let fast = residual_dual_norm(&model, &traj).map_err(|e| e.to_string())?;
        let direct = direct_dual_norm(&model, &traj);
        worst = worst.max((fast - direct).abs() / direct);
    }
    check(worst <= 1e-10, format!("max relative difference {worst:.2e} over 5 random reduced trajectories"))
}

fn eim_exactness(ctx: &Context) -> Outcome {
    let eim = &ctx.eim;
    let mut worst: f64 = 0.0;
    for log in &eim.training_log {
        let field = &ctx.bank.entries[log.bank_index].values;
        let interp = eim_interpolate(eim, field).map_err(|e| e.to_string())?;
        for &e in &eim.interp_indices {
            worst = worst.max((interp[e] - field[e]).abs());
        }
    }
    let m = eim.dim();
    let structure = (0..m).all(|i| eim.b(i, i) == 1.0 && (i + 1..m).all(|j| eim.b(i, j) == 0.0));
    check(
        worst <= 1e-12 && structure && m == ctx.cfg.eim.m_max,
        format!("M = {m}, max error at interpolation points {worst:.2e}, B unit lower triangular: {structure}"),
    )
}

fn speedup(ctx: &Context) -> Outcome {
    let model = ctx.full.truncated(5, 8).map_err(|e| e.to_string())?;
    let res = bench_model(&model, &ctx.cfg.test_set(), 20, &ctx.cfg.newton, &RunOptions::default()).map_err(|e| e.to_string())?;
    check(
        res.speedup() >= 3.0 && res.speedup_certified() >= 2.0,
        format!(
            "truth {:.3e} s, reduced {:.3e} s, certified {:.3e} s over 20 runs: speed-up {:.2} (>= 3), certified {:.2} (>= 2)",
            res.truth_mean,
            res.rb_mean,
            res.certified_mean,
            res.speedup(),
            res.speedup_certified()
        ),
    )
}

fn build_model(n_elem: usize, newton: &NewtonSettings) -> RbModel {
    let mut cfg = ProblemConfig::magnetoquasistatic_1d();
    cfg.n_elem = n_elem;
    let problem = Arc::new(TruthProblem::from_config(&cfg).unwrap());
    let bank = SnapshotBank::from_truth(&problem, &problem.domain.linspace(40), newton).unwrap();
    let eim = eim_build(&bank, 1e-10, 8).unwrap();
    let settings = GreedySettings {
        tol: 1e-12,
        n_min: 5,
        n_max: 5,
        ..Default::default()
    };
    pod_greedy(problem.clone(), &eim, &problem.domain.linspace(40), &settings).unwrap()
}

fn median_time(mut f: impl FnMut(), reps: usize) -> f64 {
    f();
    let mut t: Vec<f64> = (0..reps)
        .map(|_| {
            let s = Instant::now();
            f();
            s.elapsed().as_secs_f64()
        })
        .collect();
    t.sort_by(f64::total_cmp);
    t[reps / 2]
}

fn mesh_independence(ctx: &Context) -> Outcome {
    let coarse = build_model(100, &ctx.cfg.newton);
    let fine = build_model(200, &ctx.cfg.newton);
    if (coarse.n(), coarse.m()) != (fine.n(), fine.m()) {
        return Err(format!("sizes differ: {:?} vs {:?}", (coarse.n(), coarse.m()), (fine.n(), fine.m())));
    }
    let mus = ctx.cfg.test_set();
    let online = OnlineSettings::default();
    let time = |model: &RbModel| {
        let mut i = 0;
        median_time(
            || {
                rb_solve(model, mus[i % mus.len()], &online).unwrap();
                i += 1;
            },
            31,
        )
    };
    let (tc, tf) = (time(&coarse), time(&fine));
    let truth_c = median_time(|| drop(truth_solve(&coarse.problem, 3.0, &ctx.cfg.newton).unwrap()), 11);
    let truth_f = median_time(|| drop(truth_solve(&fine.problem, 3.0, &ctx.cfg.newton).unwrap()), 11);
    let ratio = tf / tc;
    // Linear growth in the number of unknowns would double the time.
    check(
        ratio < 1.5,
        format!(
            "rb_solve {tc:.3e} s -> {tf:.3e} s (ratio {ratio:.2}, linear growth would give 2); truth ratio {:.2}",
            truth_f / truth_c
        ),
    )
}

fn main() {
    let ctx = setup();
    let criteria: [Criterion; 11] = [
        ("table reproduction at (N, M) = (5, 8)", table_reproduction),
        ("bound rigor", bound_rigor),
        ("effectivities", effectivities),
        ("full-basis oracle equivalence", oracle_equivalence),
        ("Jacobian correctness", jacobians),
        ("Crank-Nicolson temporal order", temporal_order),
        ("affine reconstruction", affine_reconstruction),
        ("Riesz dual-norm agreement", riesz_agreement),
        ("EIM interpolation exactness", eim_exactness),
        ("online speed-up", speedup),
        ("mesh independence", mesh_independence),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&ctx))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:2} {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
