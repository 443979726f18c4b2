//! High-fidelity Crank–Nicolson solver for `u_t - (nu(|u'|; mu) u')' = g` with a
//! Newton iteration per time step.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fem::{
    assemble_mass, assemble_v_gram, elem_gradient_into, h_project, load_vector,
    weighted_stiffness_apply, weighted_stiffness_into, CoeffVector, ElemField, Mesh1D,
};
use crate::linalg::{norm2, SymTridiag};

/// Scalar coefficient `nu(s; mu)` of the quasilinear form, `s = |u'|`.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn value(&self, s: f64, mu: f64) -> f64;

    /// `d nu / d s`
    fn derivative(&self, s: f64, mu: f64) -> f64;

    /// `(nu, nu_s)` in one call, for models that can share work between the two.
    fn value_and_derivative(&self, s: f64, mu: f64) -> (f64, f64) {
        (self.value(s, mu), self.derivative(s, mu))
    }

    /// `out[i] = nu(|s[i]|)` over a batch of magnitudes.
    fn values_into(&self, s: &[f64], mu: f64, out: &mut [f64]) {
        for (o, si) in out.iter_mut().zip(s) {
            *o = self.value(si.abs(), mu);
        }
    }

    /// Parameter-independent lower bound usable as monotonicity constant, if known.
    fn analytic_monotonicity_constant(&self) -> Option<f64> {
        None
    }

    /// Weight of the linearized form: `d/dp [nu(|p|) p] = nu(|p|) + nu_s(|p|) |p|`.
    fn tangent_weight(&self, p: f64, mu: f64) -> f64 {
        let s = p.abs();
        self.value(s, mu) + self.derivative(s, mu) * s
    }
}

/// Reluctivity models that can be named in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reluctivity {
    /// `nu(s; mu) = exp(mu s^2) + 1`
    Exponential,
    /// `nu = value`, independent of `s` and `mu`.
    Constant { value: f64 },
}

impl Nonlinearity for Reluctivity {
    #[inline]
    fn value(&self, s: f64, mu: f64) -> f64 {
        match *self {
            Reluctivity::Exponential => (mu * s * s).exp() + 1.0,
            Reluctivity::Constant { value } => value,
        }
    }

    #[inline]
    fn derivative(&self, s: f64, mu: f64) -> f64 {
        match *self {
            Reluctivity::Exponential => 2.0 * mu * s * (mu * s * s).exp(),
            Reluctivity::Constant { .. } => 0.0,
        }
    }

    #[inline]
    fn value_and_derivative(&self, s: f64, mu: f64) -> (f64, f64) {
        match *self {
            Reluctivity::Exponential => {
                let e = (mu * s * s).exp();
                (e + 1.0, 2.0 * mu * s * e)
            }
            Reluctivity::Constant { value } => (value, 0.0),
        }
    }

    fn values_into(&self, s: &[f64], mu: f64, out: &mut [f64]) {
        match *self {
            Reluctivity::Exponential => {
                for (o, si) in out.iter_mut().zip(s) {
                    *o = (mu * si * si).exp() + 1.0;
                }
            }
            Reluctivity::Constant { value } => out.iter_mut().for_each(|o| *o = value),
        }
    }

    fn analytic_monotonicity_constant(&self) -> Option<f64> {
        match *self {
            // inf_s exp(mu s^2) + 1 = 2 for every mu >= 0
            Reluctivity::Exponential => Some(2.0),
            Reluctivity::Constant { value } => Some(value),
        }
    }
}

pub type TimeCoefficient = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpatialFunction = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One term `theta(t, mu) g(x)` of an affinely decomposed source.
#[derive(Clone)]
pub struct AffineSourceTerm {
    pub theta: TimeCoefficient,
    pub spatial: SpatialFunction,
}

#[derive(Clone, Default)]
pub struct SourceTerm {
    pub terms: Vec<AffineSourceTerm>,
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SourceTerm({} terms)", self.terms.len())
    }
}

impl SourceTerm {
    pub fn zero() -> Self {
        SourceTerm { terms: Vec::new() }
    }

    pub fn single(theta: TimeCoefficient, spatial: SpatialFunction) -> Self {
        SourceTerm {
            terms: vec![AffineSourceTerm { theta, spatial }],
        }
    }

    /// `amplitude sin(2 pi x) sin(2 pi t)`
    pub fn sinusoidal(amplitude: f64) -> Self {
        SourceTerm::single(
            Arc::new(|t, _mu| (2.0 * PI * t).sin()),
            Arc::new(move |x| amplitude * (2.0 * PI * x).sin()),
        )
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn thetas(&self, t: f64, mu: f64) -> Vec<f64> {
        self.terms.iter().map(|term| (term.theta)(t, mu)).collect()
    }

    pub fn eval(&self, x: f64, t: f64, mu: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| (term.theta)(t, mu) * (term.spatial)(x))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    Zero,
    /// `amplitude sin(2 pi x) sin(2 pi t)`
    Sinusoidal { amplitude: f64 },
}

impl SourceKind {
    pub fn build(&self) -> SourceTerm {
        match *self {
            SourceKind::Zero => SourceTerm::zero(),
            SourceKind::Sinusoidal { amplitude } => SourceTerm::sinusoidal(amplitude),
        }
    }
}

#[derive(Clone, Default)]
pub enum InitialCondition {
    #[default]
    Zero,
    Function(SpatialFunction),
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Zero => write!(f, "Zero"),
            InitialCondition::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Zero,
    /// `amplitude sin(pi x)`
    SineMode { amplitude: f64 },
}

impl InitialKind {
    pub fn build(&self) -> InitialCondition {
        match *self {
            InitialKind::Zero => InitialCondition::Zero,
            InitialKind::SineMode { amplitude } => {
                InitialCondition::Function(Arc::new(move |x| amplitude * (PI * x).sin()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(steps: usize, t_final: f64) -> Result<Self> {
        if steps == 0 || !(t_final > 0.0) {
            return Err(Error::InvalidInput(format!(
                "time grid needs K >= 1 and T > 0 (got K = {steps}, T = {t_final})"
            )));
        }
        let dt = t_final / steps as f64;
        let mut t: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        t[steps] = t_final;
        Ok(TimeGrid { t })
    }

    pub fn from_points(t: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || t[0] != 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "time points must start at 0 and increase strictly".into(),
            ));
        }
        Ok(TimeGrid { t })
    }

    /// Number of steps `K`.
    pub fn steps(&self) -> usize {
        self.t.len() - 1
    }

    /// Width of step `k` (`1 <= k <= K`).
    #[inline]
    pub fn dt(&self, k: usize) -> f64 {
        self.t[k] - self.t[k - 1]
    }

    pub fn t_final(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn max_dt(&self) -> f64 {
        (1..self.t.len()).map(|k| self.dt(k)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDomain {
    pub lo: f64,
    pub hi: f64,
}

impl ParamDomain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!("bad parameter interval [{lo}, {hi}]")));
        }
        Ok(ParamDomain { lo, hi })
    }

    pub fn contains(&self, mu: f64) -> bool {
        mu >= self.lo && mu <= self.hi
    }

    pub fn check(&self, mu: f64) -> Result<()> {
        if self.contains(mu) {
            Ok(())
        } else {
            Err(Error::ParameterOutOfDomain {
                mu,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// Uniform grid of `n` points including both ends.
    pub fn linspace(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            _ => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Serializable description of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub n_elem: usize,
    pub steps: usize,
    pub t_final: f64,
    pub nonlinearity: Reluctivity,
    pub source: SourceKind,
    #[serde(default)]
    pub initial: InitialKind,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl ProblemConfig {
    /// The 1-D magnetoquasistatic benchmark.
    pub fn magnetoquasistatic_1d() -> Self {
        ProblemConfig {
            n_elem: 100,
            steps: 200,
            t_final: 0.2,
            nonlinearity: Reluctivity::Exponential,
            source: SourceKind::Sinusoidal { amplitude: 12.0 },
            initial: InitialKind::Zero,
            mu_min: 1.0,
            mu_max: 5.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: 1e-8,
            max_iter: 25,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidInput(format!(
                "Newton settings need tol > 0 and max_iter >= 1 (got {:?})",
                self
            )));
        }
        Ok(())
    }
}

/// A fully assembled parametrized problem.
#[derive(Clone, Debug)]
pub struct TruthProblem {
    pub mesh: Mesh1D,
    pub time: TimeGrid,
    pub nonlinearity: Arc<dyn Nonlinearity>,
    pub source: SourceTerm,
    pub initial: InitialCondition,
    pub domain: ParamDomain,
    /// Present when the problem was built from a config.
    pub config: Option<ProblemConfig>,
    pub mass: SymTridiag,
    pub v_gram: SymTridiag,
    /// `<g_q, phi_i>` for every source term.
    pub source_loads: Vec<CoeffVector>,
}

impl TruthProblem {
    pub fn new(
        mesh: Mesh1D,
        time: TimeGrid,
        nonlinearity: Arc<dyn Nonlinearity>,
        source: SourceTerm,
        initial: InitialCondition,
        domain: ParamDomain,
    ) -> Self {
        let mass = assemble_mass(&mesh);
        let v_gram = assemble_v_gram(&mesh);
        let source_loads = source
            .terms
            .iter()
            .map(|term| load_vector(&mesh, |x| (term.spatial)(x)))
            .collect();
        TruthProblem {
            mesh,
            time,
            nonlinearity,
            source,
            initial,
            domain,
            config: None,
            mass,
            v_gram,
            source_loads,
        }
    }

    pub fn from_config(config: &ProblemConfig) -> Result<Self> {
        let mesh = Mesh1D::uniform(config.n_elem)?;
        let time = TimeGrid::uniform(config.steps, config.t_final)?;
        let domain = ParamDomain::new(config.mu_min, config.mu_max)?;
        let mut p = TruthProblem::new(
            mesh,
            time,
            Arc::new(config.nonlinearity),
            config.source.build(),
            config.initial.build(),
            domain,
        );
        p.config = Some(config.clone());
        Ok(p)
    }

    pub fn n_dof(&self) -> usize {
        self.mesh.n_dof()
    }

    /// `P_H u_o`
    pub fn initial_state(&self) -> Result<CoeffVector> {
        match &self.initial {
            InitialCondition::Zero => Ok(vec![0.0; self.n_dof()]),
            InitialCondition::Function(f) => h_project(&self.mesh, |x| f(x)),
        }
    }

    /// `g_h(t; mu) = sum_q theta_q(t, mu) <g_q, phi_i>`
    pub fn source_vector(&self, t: f64, mu: f64) -> CoeffVector {
        let mut g = vec![0.0; self.n_dof()];
        for (term, load) in self.source.terms.iter().zip(&self.source_loads) {
            let theta = (term.theta)(t, mu);
            for (gi, li) in g.iter_mut().zip(load) {
                *gi += theta * li;
            }
        }
        g
    }

    /// `nu(|u'|_e; mu)` on every element.
    pub fn nonlinearity_field(&self, u: &[f64], mu: f64) -> ElemField {
        let mut grad = vec![0.0; self.mesh.n_elem];
        elem_gradient_into(&self.mesh, u, &mut grad);
        grad.iter()
            .map(|g| self.nonlinearity.value(g.abs(), mu))
            .collect()
    }
}

/// `G_h(u_k)` of one Crank–Nicolson step.
pub fn assemble_residual(
    problem: &TruthProblem,
    u_k: &[f64],
    u_km1: &[f64],
    k: usize,
    mu: f64,
) -> Result<CoeffVector> {
    let n = problem.n_dof();
    check_len(n, u_k.len())?;
    check_len(n, u_km1.len())?;
    check_step(problem, k)?;
    let dt = problem.time.dt(k);
    let g_now = problem.source_vector(problem.time.t[k], mu);
    let g_prev = problem.source_vector(problem.time.t[k - 1], mu);
    let a_now = operator_apply(problem, u_k, mu);
    let a_prev = operator_apply(problem, u_km1, mu);
    let diff: Vec<f64> = u_k.iter().zip(u_km1).map(|(a, b)| a - b).collect();
    let m_diff = problem.mass.mul_vec(&diff);
    Ok((0..n)
        .map(|i| m_diff[i] / dt - 0.5 * (g_now[i] + g_prev[i]) + 0.5 * (a_now[i] + a_prev[i]))
        .collect())
}

/// `J_h(u_k) = M / dt + A'(u_k) / 2`
pub fn assemble_jacobian(
    problem: &TruthProblem,
    u_k: &[f64],
    k: usize,
    mu: f64,
) -> Result<SymTridiag> {
    check_len(problem.n_dof(), u_k.len())?;
    check_step(problem, k)?;
    let mut grad = vec![0.0; problem.mesh.n_elem];
    elem_gradient_into(&problem.mesh, u_k, &mut grad);
    let w: Vec<f64> = grad
        .iter()
        .map(|&p| problem.nonlinearity.tangent_weight(p, mu))
        .collect();
    let mut a = SymTridiag::zeros(problem.n_dof());
    weighted_stiffness_into(&problem.mesh, &w, &mut a);
    Ok(problem.mass.scaled(1.0 / problem.time.dt(k)).add_scaled(0.5, &a))
}

fn check_step(problem: &TruthProblem, k: usize) -> Result<()> {
    if k == 0 || k > problem.time.steps() {
        return Err(Error::InvalidInput(format!(
            "step index {k} outside 1..={}",
            problem.time.steps()
        )));
    }
    Ok(())
}

/// `A_h(u; mu) u`
fn operator_apply(problem: &TruthProblem, u: &[f64], mu: f64) -> Vec<f64> {
    let w = problem.nonlinearity_field(u, mu);
    let mut out = vec![0.0; u.len()];
    weighted_stiffness_apply(&problem.mesh, &w, u, &mut out);
    out
}

/// Reusable buffers for the Newton loop.
struct StepWorkspace {
    grad: Vec<f64>,
    w: Vec<f64>,
    au: Vec<f64>,
    mu_vec: Vec<f64>,
    residual: Vec<f64>,
    jac: SymTridiag,
    stiff: SymTridiag,
}

impl StepWorkspace {
    fn new(mesh: &Mesh1D) -> Self {
        let n = mesh.n_dof();
        StepWorkspace {
            grad: vec![0.0; mesh.n_elem],
            w: vec![0.0; mesh.n_elem],
            au: vec![0.0; n],
            mu_vec: vec![0.0; n],
            residual: vec![0.0; n],
            jac: SymTridiag::zeros(n),
            stiff: SymTridiag::zeros(n),
        }
    }
}

/// Newton iteration for step `k`; `u` holds the initial iterate and receives the root.
/// `fixed` is the part of the residual that does not depend on `u_k`.
#[allow(clippy::too_many_arguments)]
fn newton_core(
    problem: &TruthProblem,
    u: &mut [f64],
    fixed: &[f64],
    dt: f64,
    mu: f64,
    k: usize,
    settings: &NewtonSettings,
    ws: &mut StepWorkspace,
) -> Result<usize> {
    let mesh = &problem.mesh;
    let nl = problem.nonlinearity.as_ref();
    let inv_dt = 1.0 / dt;
    let mut iter = 0;
    loop {
        elem_gradient_into(mesh, u, &mut ws.grad);
        for (w, g) in ws.w.iter_mut().zip(&ws.grad) {
            *w = nl.value(g.abs(), mu);
        }
        weighted_stiffness_apply(mesh, &ws.w, u, &mut ws.au);
        problem.mass.mul_vec_into(u, &mut ws.mu_vec);
        for i in 0..u.len() {
            ws.residual[i] = inv_dt * ws.mu_vec[i] + 0.5 * ws.au[i] + fixed[i];
        }
        let res = norm2(&ws.residual);
        if !res.is_finite() {
            return Err(Error::NewtonNonConvergence {
                step: k,
                iterations: iter,
                residual: res,
            });
        }
        if res < settings.tol {
            return Ok(iter);
        }
        if iter == settings.max_iter {
            return Err(Error::NewtonNonConvergence {
                step: k,
                iterations: iter,
                residual: res,
            });
        }
        for (w, g) in ws.w.iter_mut().zip(&ws.grad) {
            *w = nl.tangent_weight(*g, mu);
        }
        weighted_stiffness_into(mesh, &ws.w, &mut ws.stiff);
        for i in 0..u.len() {
            ws.jac.diag[i] = inv_dt * problem.mass.diag[i] + 0.5 * ws.stiff.diag[i];
        }
        for i in 0..ws.jac.off.len() {
            ws.jac.off[i] = inv_dt * problem.mass.off[i] + 0.5 * ws.stiff.off[i];
        }
        for r in ws.residual.iter_mut() {
            *r = -*r;
        }
        ws.jac.solve_in_place(&mut ws.residual)?;
        for (ui, d) in u.iter_mut().zip(&ws.residual) {
            *ui += d;
        }
        iter += 1;
    }
}

/// `-M u_{k-1} / dt - (g^k + g^{k-1}) / 2 + A(u_{k-1}) u_{k-1} / 2`
fn fixed_part(problem: &TruthProblem, u_prev: &[f64], k: usize, mu: f64, ws: &mut StepWorkspace) -> Vec<f64> {
    let dt = problem.time.dt(k);
    let g_now = problem.source_vector(problem.time.t[k], mu);
    let g_prev = problem.source_vector(problem.time.t[k - 1], mu);
    elem_gradient_into(&problem.mesh, u_prev, &mut ws.grad);
    for (w, g) in ws.w.iter_mut().zip(&ws.grad) {
        *w = problem.nonlinearity.value(g.abs(), mu);
    }
    weighted_stiffness_apply(&problem.mesh, &ws.w, u_prev, &mut ws.au);
    problem.mass.mul_vec_into(u_prev, &mut ws.mu_vec);
    (0..u_prev.len())
        .map(|i| -ws.mu_vec[i] / dt - 0.5 * (g_now[i] + g_prev[i]) + 0.5 * ws.au[i])
        .collect()
}

/// Solves `G_h(u; mu) = 0` for step `k` starting from `u_init`.
/// Returns the root and the number of Newton iterations.
pub fn newton_solve(
    problem: &TruthProblem,
    u_init: &[f64],
    u_prev: &[f64],
    k: usize,
    mu: f64,
    settings: &NewtonSettings,
) -> Result<(CoeffVector, usize)> {
    settings.validate()?;
    check_len(problem.n_dof(), u_init.len())?;
    check_len(problem.n_dof(), u_prev.len())?;
    check_step(problem, k)?;
    let mut ws = StepWorkspace::new(&problem.mesh);
    let fixed = fixed_part(problem, u_prev, k, mu, &mut ws);
    let mut u = u_init.to_vec();
    let iters = newton_core(problem, &mut u, &fixed, problem.time.dt(k), mu, k, settings, &mut ws)?;
    Ok((u, iters))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTrajectory {
    pub mu: f64,
    /// `K + 1` coefficient vectors, `states[0] = P_H u_o`.
    pub states: Vec<CoeffVector>,
    pub newton_iters: Vec<usize>,
}

/// Marches the Crank–Nicolson scheme over the whole time grid, warm-starting each
/// Newton solve at the previous state.
pub fn truth_solve(
    problem: &TruthProblem,
    mu: f64,
    settings: &NewtonSettings,
) -> Result<TruthTrajectory> {
    problem.domain.check(mu)?;
    settings.validate()?;
    let steps = problem.time.steps();
    let mut ws = StepWorkspace::new(&problem.mesh);
    let mut states = Vec::with_capacity(steps + 1);
    let mut newton_iters = Vec::with_capacity(steps);
    states.push(problem.initial_state()?);
    for k in 1..=steps {
        let prev = &states[k - 1];
        let fixed = fixed_part(problem, prev, k, mu, &mut ws);
        let mut u = prev.clone();
        let iters = newton_core(problem, &mut u, &fixed, problem.time.dt(k), mu, k, settings, &mut ws)?;
        newton_iters.push(iters);
        states.push(u);
    }
    Ok(TruthTrajectory {
        mu,
        states,
        newton_iters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub passes: bool,
    /// `inf nu` over the sampled grid; a candidate monotonicity constant.
    pub m_a: f64,
    /// Largest difference quotient of `s -> nu(s) s`; a candidate Lipschitz constant.
    pub l_a: f64,
    /// Smallest difference quotient of `s -> nu(s) s`.
    pub min_slope: f64,
    pub violations: usize,
}

/// Checks positivity of `nu` and strict monotonicity of `s -> nu(s; mu) s` on all
/// pairs of grid points.
pub fn check_monotonicity(
    nonlinearity: &dyn Nonlinearity,
    mu_grid: &[f64],
    s_grid: &[f64],
) -> MonotonicityReport {
    let mut m_a = f64::INFINITY;
    let mut l_a: f64 = 0.0;
    let mut min_slope = f64::INFINITY;
    let mut violations = 0;
    for &mu in mu_grid {
        let flux: Vec<f64> = s_grid
            .iter()
            .map(|&s| nonlinearity.value(s, mu) * s)
            .collect();
        for &s in s_grid {
            let v = nonlinearity.value(s, mu);
            m_a = m_a.min(v);
            if !(v > 0.0) {
                violations += 1;
            }
        }
        for i in 0..s_grid.len() {
            for j in i + 1..s_grid.len() {
                let ds = s_grid[j] - s_grid[i];
                if ds == 0.0 {
                    continue;
                }
                let slope = (flux[j] - flux[i]) / ds;
                if !(slope > 0.0) {
                    violations += 1;
                }
                min_slope = min_slope.min(slope);
                l_a = l_a.max(slope.abs());
            }
        }
    }
    MonotonicityReport {
        passes: violations == 0,
        m_a,
        l_a,
        min_slope,
        violations,
    }
}
