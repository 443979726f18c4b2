//! Online stage: reduced Crank–Nicolson/Newton solve with the EIM surrogate, the
//! offline/online residual dual norm and the a-posteriori error certificate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fem::CoeffVector;
use crate::linalg::{dense_solve_in_place, dot_unrolled, norm2};
use crate::offline::RbModel;
use crate::truth::{NewtonSettings, TruthTrajectory};

/// How the reduced Newton Jacobian treats the derivative of the EIM coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// `M_N / dt + A_N(phi) / 2`; the `d phi / du` term is dropped.
    #[default]
    Inexact,
    /// Full derivative, including `C B^{-1} diag(nu_s sign) Z`.
    Exact,
}

/// Which nonlinear operator the reduced solve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityTreatment {
    /// Online-efficient EIM surrogate.
    #[default]
    Eim,
    /// The exact nonlinearity evaluated on every element. Cost depends on the mesh;
    /// meant for verification only.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicityMode {
    #[default]
    Analytic,
    /// Smallest value of `nu` along the lifted reduced trajectory.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineSettings {
    pub newton: NewtonSettings,
    pub jacobian: JacobianMode,
    pub treatment: NonlinearityTreatment,
}

impl Default for OnlineSettings {
    fn default() -> Self {
        OnlineSettings {
            newton: NewtonSettings::default(),
            jacobian: JacobianMode::Inexact,
            treatment: NonlinearityTreatment::Eim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbTrajectory {
    pub mu: f64,
    /// `K + 1` reduced coefficient vectors.
    pub coeffs: Vec<CoeffVector>,
    /// EIM coefficients `phi^k` for `k = 0..=K`; empty for the exact treatment.
    pub eim_coeffs: Vec<Vec<f64>>,
    pub newton_iters: Vec<usize>,
    /// Steps in which the inexact iteration stalled and switched to the full Jacobian.
    pub fallback_steps: usize,
}

/// Residual reduction factor above which inexact Newton counts as stalled.
pub const STALL_RATIO: f64 = 0.1;

/// Buffers for one reduced solve, sized `N` and `M`, plus flat copies of the
/// reduced operators in the layout the inner loops want.
struct Workspace {
    n: usize,
    m: usize,
    /// `Z` row-major `M x N`
    z: Vec<f64>,
    /// `B^{-1}` row-major `M x M` (lower triangular)
    b_inv: Vec<f64>,
    /// `D_i = sum_k (B^{-1})_{ki} A_k`, each `N x N` and symmetric, so that
    /// `A_N(phi) = sum_i nu(s_i) D_i`.
    d_blocks: Vec<f64>,
    s: Vec<f64>,
    vals: Vec<f64>,
    /// `nu_s(|s_i|) sign(s_i)`, filled only when `with_derivative` is set
    dvals: Vec<f64>,
    with_derivative: bool,
    phi: Vec<f64>,
    /// `A_N(phi)`, symmetric `N x N`
    a: Vec<f64>,
    au: Vec<f64>,
    mu_vec: Vec<f64>,
    residual: Vec<f64>,
    /// row-major Jacobian
    jac: Vec<f64>,
    du: Vec<f64>,
    /// exact treatment: gradient and weights per element
    grad: Vec<f64>,
    w: Vec<f64>,
}

impl Workspace {
    fn new(model: &RbModel) -> Self {
        let n = model.n();
        let m = model.m();
        let n_elem = model.problem.mesh.n_elem;
        let zm = &model.ops.interp_gradients;
        let mut z = Vec::with_capacity(m * n);
        for i in 0..m {
            z.extend((0..n).map(|j| zm[(i, j)]));
        }
        let mut b_inv = vec![0.0; m * m];
        let mut unit = vec![0.0; m];
        let mut col = vec![0.0; m];
        for j in 0..m {
            unit.fill(0.0);
            unit[j] = 1.0;
            model.eim.coefficients_into(&unit, &mut col);
            for i in 0..m {
                b_inv[i * m + j] = col[i];
            }
        }
        let mut d_blocks = vec![0.0; m * n * n];
        for (i, d) in d_blocks.chunks_exact_mut(n * n).enumerate() {
            for (k, block) in model.ops.eim_blocks.iter().enumerate().skip(i) {
                let c = b_inv[k * m + i];
                for (x, b) in d.iter_mut().zip(block.as_slice()) {
                    *x += c * b;
                }
            }
        }
        Workspace {
            n,
            m,
            z,
            b_inv,
            d_blocks,
            s: vec![0.0; m],
            vals: vec![0.0; m],
            dvals: vec![0.0; m],
            with_derivative: false,
            phi: vec![0.0; m],
            a: vec![0.0; n * n],
            au: vec![0.0; n],
            mu_vec: vec![0.0; n],
            residual: vec![0.0; n],
            jac: vec![0.0; n * n],
            du: vec![0.0; n],
            grad: vec![0.0; n_elem],
            w: vec![0.0; n_elem],
        }
    }

    /// `phi = B^{-1} nu(s)` for the state last passed to `eim_state`.
    fn update_phi(&mut self) {
        for (p, row) in self.phi.iter_mut().zip(self.b_inv.chunks_exact(self.m)) {
            *p = row.iter().zip(&self.vals).map(|(a, b)| a * b).sum();
        }
    }
}

#[inline]
fn matvec(a: &[f64], x: &[f64], y: &mut [f64], n: usize) {
    // column-major `a`
    y.fill(0.0);
    for (col, xj) in a.chunks_exact(n).zip(x) {
        for (yi, aij) in y.iter_mut().zip(col) {
            *yi += aij * xj;
        }
    }
}

/// Evaluates the nonlinearity at the interpolation points and assembles
/// `A_N(phi(u))` and `A_N(phi(u)) u` into the workspace.
fn eim_state(model: &RbModel, u: &[f64], mu: f64, ws: &mut Workspace) {
    let n = ws.n;
    let nl = model.problem.nonlinearity.as_ref();
    for i in 0..ws.m {
        let s: f64 = ws.z[i * n..(i + 1) * n].iter().zip(u).map(|(a, b)| a * b).sum();
        ws.s[i] = s;
        if ws.with_derivative {
            let (v, d) = nl.value_and_derivative(s.abs(), mu);
            ws.vals[i] = v;
            ws.dvals[i] = d * s.signum();
        } else {
            ws.vals[i] = nl.value(s.abs(), mu);
        }
    }
    ws.a.fill(0.0);
    for (v, block) in ws.vals.iter().zip(ws.d_blocks.chunks_exact(n * n)) {
        for (a, b) in ws.a.iter_mut().zip(block) {
            *a += v * b;
        }
    }
    matvec(&ws.a, u, &mut ws.au, n);
}

/// Exact treatment: `A_N(u)` assembled over the mesh. With `tangent`, the weights
/// of the linearized form are used instead.
fn exact_operator(model: &RbModel, u: &[f64], mu: f64, tangent: bool, ws: &mut Workspace) {
    let n = ws.n;
    let h = model.problem.mesh.h;
    let nl = model.problem.nonlinearity.as_ref();
    ws.grad.fill(0.0);
    for (c, g) in u.iter().zip(&model.basis_gradients) {
        for (acc, ge) in ws.grad.iter_mut().zip(g) {
            *acc += c * ge;
        }
    }
    for (w, p) in ws.w.iter_mut().zip(&ws.grad) {
        *w = if tangent {
            nl.tangent_weight(*p, mu)
        } else {
            nl.value(p.abs(), mu)
        };
    }
    ws.a.fill(0.0);
    for i in 0..n {
        for j in 0..=i {
            let gi = &model.basis_gradients[i];
            let gj = &model.basis_gradients[j];
            let v: f64 = (0..gi.len()).map(|e| ws.w[e] * gi[e] * gj[e]).sum::<f64>() * h;
            ws.a[j * n + i] = v;
            ws.a[i * n + j] = v;
        }
    }
}

fn apply_operator(model: &RbModel, u: &[f64], mu: f64, treatment: NonlinearityTreatment, ws: &mut Workspace) {
    match treatment {
        NonlinearityTreatment::Eim => eim_state(model, u, mu, ws),
        NonlinearityTreatment::Exact => {
            exact_operator(model, u, mu, false, ws);
            let n = ws.n;
            let mut au = std::mem::take(&mut ws.au);
            matvec(&ws.a, u, &mut au, n);
            ws.au = au;
        }
    }
}

/// Fills `ws.jac` (row-major) with the Jacobian at `u`; `ws` must hold the state of `u`.
fn assemble_jacobian_ws(
    model: &RbModel,
    u: &[f64],
    mu: f64,
    inv_dt: f64,
    settings: &OnlineSettings,
    ws: &mut Workspace,
) {
    let (n, m) = (ws.n, ws.m);
    let mass = model.ops.mass.as_slice();
    match settings.treatment {
        NonlinearityTreatment::Eim => {
            // M_N and A_N are symmetric, so storage order does not matter here.
            for ((j, mm), a) in ws.jac.iter_mut().zip(mass).zip(&ws.a) {
                *j = inv_dt * mm + 0.5 * a;
            }
            if settings.jacobian == JacobianMode::Exact {
                // E = sum_i nu_s(|s_i|) sign(s_i) (D_i u) z_i^T
                for i in 0..m {
                    matvec(&ws.d_blocks[i * n * n..(i + 1) * n * n], u, &mut ws.du, n);
                    let d = 0.5 * ws.dvals[i];
                    let zi = &ws.z[i * n..(i + 1) * n];
                    for (jrow, c) in ws.jac.chunks_exact_mut(n).zip(&ws.du) {
                        let f = d * c;
                        for (j, zij) in jrow.iter_mut().zip(zi) {
                            *j += f * zij;
                        }
                    }
                }
            }
        }
        NonlinearityTreatment::Exact => {
            if settings.jacobian == JacobianMode::Exact {
                exact_operator(model, u, mu, true, ws);
            }
            for i in 0..n {
                for j in 0..n {
                    ws.jac[i * n + j] = inv_dt * mass[j * n + i] + 0.5 * ws.a[j * n + i];
                }
            }
        }
    }
}

/// Reduced Crank–Nicolson march with Newton's method in every step.
pub fn rb_solve(model: &RbModel, mu: f64, settings: &OnlineSettings) -> Result<RbTrajectory> {
    model.problem.domain.check(mu)?;
    settings.newton.validate()?;
    let n = model.n();
    let time = &model.problem.time;
    let steps = time.steps();
    let eim_mode = settings.treatment == NonlinearityTreatment::Eim;
    let mut ws = Workspace::new(model);
    // The inexact iteration may fall back to the full Jacobian, which needs nu_s.
    ws.with_derivative = true;
    let mut coeffs = Vec::with_capacity(steps + 1);
    let mut eim_coeffs = Vec::with_capacity(if eim_mode { steps + 1 } else { 0 });
    let mut newton_iters = Vec::with_capacity(steps);

    let mut u: Vec<f64> = model.ops.initial.iter().cloned().collect();
    apply_operator(model, &u, mu, settings.treatment, &mut ws);
    if eim_mode {
        ws.update_phi();
        eim_coeffs.push(ws.phi.clone());
    }
    coeffs.push(u.clone());
    let mut fixed = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mass = model.ops.mass.as_slice();
    let mut theta_prev = model.problem.source.thetas(time.t[0], mu);
    let mut fallback_steps = 0;

    for k in 1..=steps {
        let dt = time.dt(k);
        let inv_dt = 1.0 / dt;
        let theta = model.problem.source.thetas(time.t[k], mu);
        // ws.au holds A_N(u_{k-1}) u_{k-1}
        matvec(mass, &u, &mut ws.mu_vec, n);
        for i in 0..n {
            fixed[i] = -inv_dt * ws.mu_vec[i] + 0.5 * ws.au[i];
        }
        for ((g, a), b) in model.ops.sources.iter().zip(&theta).zip(&theta_prev) {
            let c = 0.5 * (a + b);
            for (f, gi) in fixed.iter_mut().zip(g.iter()) {
                *f -= c * gi;
            }
        }
        let mut iter = 0;
        let mut step_settings = *settings;
        let mut prev_res = f64::INFINITY;
        loop {
            if iter > 0 {
                apply_operator(model, &u, mu, settings.treatment, &mut ws);
            }
            matvec(mass, &u, &mut ws.mu_vec, n);
            for i in 0..n {
                ws.residual[i] = inv_dt * ws.mu_vec[i] + 0.5 * ws.au[i] + fixed[i];
            }
            let res = norm2(&ws.residual);
            if !res.is_finite() || (iter == settings.newton.max_iter && res >= settings.newton.tol) {
                return Err(Error::NewtonNonConvergence {
                    step: k,
                    iterations: iter,
                    residual: res,
                });
            }
            if res < settings.newton.tol {
                break;
            }
            // Safeguard: once the inexact iteration stops contracting, finish the
            // step with the full Jacobian.
            if step_settings.jacobian == JacobianMode::Inexact && res > STALL_RATIO * prev_res {
                step_settings.jacobian = JacobianMode::Exact;
                fallback_steps += 1;
            }
            prev_res = res;
            assemble_jacobian_ws(model, &u, mu, inv_dt, &step_settings, &mut ws);
            for (d, r) in delta.iter_mut().zip(&ws.residual) {
                *d = -r;
            }
            dense_solve_in_place(&mut ws.jac, &mut delta, n)?;
            for (ui, d) in u.iter_mut().zip(&delta) {
                *ui += d;
            }
            iter += 1;
        }
        // ws now holds the state of u_k, reused by the next step.
        newton_iters.push(iter);
        if eim_mode {
            ws.update_phi();
            eim_coeffs.push(ws.phi.clone());
        }
        coeffs.push(u.clone());
        theta_prev = theta;
    }
    Ok(RbTrajectory {
        mu,
        coeffs,
        eim_coeffs,
        newton_iters,
        fallback_steps,
    })
}

/// Reduced residual `G_N(u_k)` of step `k` with the EIM surrogate.
pub fn rb_residual(model: &RbModel, mu: f64, k: usize, u_k: &[f64], u_km1: &[f64]) -> Result<Vec<f64>> {
    let n = model.n();
    check_len(n, u_k.len())?;
    check_len(n, u_km1.len())?;
    let time = &model.problem.time;
    if k == 0 || k > time.steps() {
        return Err(Error::InvalidInput(format!("step index {k} outside 1..={}", time.steps())));
    }
    let dt = time.dt(k);
    let mut ws = Workspace::new(model);
    eim_state(model, u_km1, mu, &mut ws);
    let a_prev = ws.au.clone();
    eim_state(model, u_k, mu, &mut ws);
    let diff: Vec<f64> = u_k.iter().zip(u_km1).map(|(a, b)| a - b).collect();
    let mut m_diff = vec![0.0; n];
    matvec(model.ops.mass.as_slice(), &diff, &mut m_diff, n);
    let theta = model.problem.source.thetas(time.t[k], mu);
    let theta_prev = model.problem.source.thetas(time.t[k - 1], mu);
    let mut out: Vec<f64> = (0..n)
        .map(|i| m_diff[i] / dt + 0.5 * (ws.au[i] + a_prev[i]))
        .collect();
    for ((g, a), b) in model.ops.sources.iter().zip(&theta).zip(&theta_prev) {
        for (o, gi) in out.iter_mut().zip(g.iter()) {
            *o -= 0.5 * (a + b) * gi;
        }
    }
    Ok(out)
}

/// Jacobian of [`rb_residual`] with respect to `u_k`.
pub fn rb_jacobian(model: &RbModel, mu: f64, k: usize, u_k: &[f64], mode: JacobianMode) -> Result<DMatrix<f64>> {
    let n = model.n();
    check_len(n, u_k.len())?;
    let time = &model.problem.time;
    if k == 0 || k > time.steps() {
        return Err(Error::InvalidInput(format!("step index {k} outside 1..={}", time.steps())));
    }
    let mut ws = Workspace::new(model);
    ws.with_derivative = true;
    eim_state(model, u_k, mu, &mut ws);
    let settings = OnlineSettings {
        jacobian: mode,
        ..Default::default()
    };
    assemble_jacobian_ws(model, u_k, mu, 1.0 / time.dt(k), &settings, &mut ws);
    Ok(DMatrix::from_row_slice(n, n, &ws.jac))
}

/// Residual coefficients `Theta^k` in the layout of the Riesz data.
fn theta_vector(model: &RbModel, traj: &RbTrajectory, k: usize, th: &[f64], th_prev: &[f64], out: &mut [f64]) {
    let n = model.n();
    let nq = model.riesz.n_source;
    let dt = model.problem.time.dt(k);
    for q in 0..nq {
        out[q] = 0.5 * (th[q] + th_prev[q]);
    }
    let (u, up) = (&traj.coeffs[k], &traj.coeffs[k - 1]);
    let (p, pp) = (&traj.eim_coeffs[k], &traj.eim_coeffs[k - 1]);
    for j in 0..n {
        out[nq + j] = -(u[j] - up[j]) / dt;
    }
    let base = nq + n;
    for m in 0..model.m() {
        for j in 0..n {
            out[base + m * n + j] = -0.5 * (p[m] * u[j] + pp[m] * up[j]);
        }
    }
}

fn check_eim_trajectory(model: &RbModel, traj: &RbTrajectory) -> Result<()> {
    let steps = model.problem.time.steps();
    check_len(steps + 1, traj.coeffs.len())?;
    if traj.eim_coeffs.len() != steps + 1 {
        return Err(Error::InvalidInput(
            "trajectory carries no EIM coefficients; certification needs the EIM treatment".into(),
        ));
    }
    Ok(())
}

/// `( sum_k dt_k ||R^k||_{V'}^2 )^{1/2}` from the precomputed Riesz Gram matrix.
pub fn residual_dual_norm(model: &RbModel, traj: &RbTrajectory) -> Result<f64> {
    check_eim_trajectory(model, traj)?;
    let q = model.riesz.len();
    let g = model.riesz.gram.as_slice();
    let time = &model.problem.time;
    let mut theta = vec![0.0; q];
    let mut th_prev = model.problem.source.thetas(time.t[0], traj.mu);
    let mut total = 0.0;
    for k in 1..=time.steps() {
        let th = model.problem.source.thetas(time.t[k], traj.mu);
        theta_vector(model, traj, k, &th, &th_prev, &mut theta);
        let quad: f64 = g
            .chunks_exact(q)
            .zip(&theta)
            .map(|(col, tj)| tj * dot_unrolled(col, &theta))
            .sum();
        total += time.dt(k) * quad.max(0.0);
        th_prev = th;
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryNorms {
    /// `||u||_Y` including the initial H-term.
    pub y_norm: f64,
    /// `||u||_{L2(V)}` by the trapezoidal rule.
    pub l2v_norm: f64,
}

/// Time quadrature for the `L2(0,T;V)` norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeQuadrature {
    #[default]
    Trapezoidal,
    /// Composite Simpson rule; needs an even number of uniform steps.
    Simpson,
}

fn reduced_sq(a: &DMatrix<f64>, u: &[f64]) -> f64 {
    let n = u.len();
    let s = a.as_slice();
    let mut acc = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            col += s[j * n + i] * u[i];
        }
        acc += u[j] * col;
    }
    acc
}

pub fn trajectory_norms(model: &RbModel, traj: &RbTrajectory) -> Result<TrajectoryNorms> {
    trajectory_norms_with(model, traj, TimeQuadrature::Trapezoidal)
}

pub fn trajectory_norms_with(model: &RbModel, traj: &RbTrajectory, rule: TimeQuadrature) -> Result<TrajectoryNorms> {
    let time = &model.problem.time;
    let steps = time.steps();
    check_len(steps + 1, traj.coeffs.len())?;
    let v: Vec<f64> = traj.coeffs.iter().map(|u| reduced_sq(&model.ops.v_gram, u)).collect();
    let l2v_sq = match rule {
        TimeQuadrature::Trapezoidal => (1..=steps).map(|k| 0.5 * time.dt(k) * (v[k] + v[k - 1])).sum(),
        TimeQuadrature::Simpson => {
            let dt = time.dt(1);
            let uniform = (1..=steps).all(|k| (time.dt(k) - dt).abs() <= 1e-12 * dt);
            if !steps.is_multiple_of(2) || !uniform {
                return Err(Error::InvalidInput(
                    "Simpson rule needs an even number of uniform steps".into(),
                ));
            }
            let mut acc = v[0] + v[steps];
            for (k, vk) in v.iter().enumerate().take(steps).skip(1) {
                acc += if k % 2 == 1 { 4.0 * vk } else { 2.0 * vk };
            }
            acc * dt / 3.0
        }
    };
    let h0 = reduced_sq(&model.ops.mass, &traj.coeffs[0]);
    Ok(TrajectoryNorms {
        y_norm: (l2v_sq + h0).sqrt(),
        l2v_norm: f64::sqrt(l2v_sq),
    })
}

/// Gradient of the lifted reduced state on every element.
fn lifted_gradient(model: &RbModel, u: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (c, g) in u.iter().zip(&model.basis_gradients) {
        for (o, ge) in out.iter_mut().zip(g) {
            *o += c * ge;
        }
    }
}

pub fn monotonicity_constant(model: &RbModel, traj: &RbTrajectory, mode: MonotonicityMode) -> Result<f64> {
    match mode {
        MonotonicityMode::Analytic => model
            .problem
            .nonlinearity
            .analytic_monotonicity_constant()
            .ok_or(Error::MissingMonotonicityConstant),
        MonotonicityMode::Empirical => {
            let nl = model.problem.nonlinearity.as_ref();
            let mut grad = vec![0.0; model.problem.mesh.n_elem];
            let mut lo = f64::INFINITY;
            for u in &traj.coeffs {
                lifted_gradient(model, u, &mut grad);
                for g in &grad {
                    lo = lo.min(nl.value(g.abs(), traj.mu));
                }
            }
            Ok(lo)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorCertificate {
    pub mu: f64,
    /// `Delta = (||R|| + delta_M ||u_N||_{L2(V)}) / m_a`
    pub delta_total: f64,
    pub delta_rb: f64,
    pub delta_ei: f64,
    pub residual_dual_norm: f64,
    pub delta_m: f64,
    pub u_norm_l2v: f64,
    pub m_a: f64,
    /// Smallest value of the interpolated coefficient over the trajectory.
    pub min_interpolated_weight: f64,
}

/// `delta_M` over `k = 0..=K`, plus the smallest interpolated coefficient value.
fn interpolation_defect(model: &RbModel, traj: &RbTrajectory) -> (f64, f64) {
    let nl = model.problem.nonlinearity.as_ref();
    let n_elem = model.problem.mesh.n_elem;
    let mut grad = vec![0.0; n_elem];
    let mut interp = vec![0.0; n_elem];
    let mut exact = vec![0.0; n_elem];
    let mut worst: f64 = 0.0;
    let mut lowest = f64::INFINITY;
    for (u, phi) in traj.coeffs.iter().zip(&traj.eim_coeffs) {
        lifted_gradient(model, u, &mut grad);
        interp.fill(0.0);
        for (p, q) in phi.iter().zip(&model.eim.basis) {
            for (o, qe) in interp.iter_mut().zip(q) {
                *o += p * qe;
            }
        }
        nl.values_into(&grad, traj.mu, &mut exact);
        for (e, i) in exact.iter().zip(&interp) {
            worst = worst.max((i - e).abs());
            lowest = lowest.min(*i);
        }
    }
    (worst, lowest)
}

pub fn certify(model: &RbModel, traj: &RbTrajectory, m_a_mode: MonotonicityMode) -> Result<ErrorCertificate> {
    check_eim_trajectory(model, traj)?;
    let res = residual_dual_norm(model, traj)?;
    let norms = trajectory_norms(model, traj)?;
    let m_a = monotonicity_constant(model, traj, m_a_mode)?;
    if !(m_a > 0.0) {
        return Err(Error::InvalidInput(format!("monotonicity constant {m_a} is not positive")));
    }
    let (delta_m, lowest) = interpolation_defect(model, traj);
    if lowest <= 0.0 {
        log::warn!(
            "interpolated coefficient reaches {lowest:.3e} at mu = {}; the reduced form may lose monotonicity",
            traj.mu
        );
    }
    let delta_rb = res / m_a;
    let delta_ei = delta_m * norms.l2v_norm / m_a;
    Ok(ErrorCertificate {
        mu: traj.mu,
        delta_total: (res + delta_m * norms.l2v_norm) / m_a,
        delta_rb,
        delta_ei,
        residual_dual_norm: res,
        delta_m,
        u_norm_l2v: norms.l2v_norm,
        m_a,
        min_interpolated_weight: lowest,
    })
}

/// Reduced solve followed by certification.
pub fn estimate(model: &RbModel, mu: f64, settings: &OnlineSettings, m_a_mode: MonotonicityMode) -> Result<ErrorCertificate> {
    let settings = OnlineSettings {
        treatment: NonlinearityTreatment::Eim,
        ..*settings
    };
    let traj = rb_solve(model, mu, &settings)?;
    certify(model, &traj, m_a_mode)
}

/// Nodal coefficients of every reduced state.
pub fn lift(model: &RbModel, traj: &RbTrajectory) -> Vec<CoeffVector> {
    traj.coeffs.iter().map(|u| model.basis.lift(u)).collect()
}

/// `||u - u_N||_Y` against a truth trajectory for the same parameter.
pub fn true_error(model: &RbModel, truth: &TruthTrajectory, traj: &RbTrajectory) -> Result<f64> {
    let p = &model.problem;
    check_len(traj.coeffs.len(), truth.states.len())?;
    let errs: Vec<Vec<f64>> = truth
        .states
        .iter()
        .zip(&traj.coeffs)
        .map(|(u, c)| {
            let l = model.basis.lift(c);
            u.iter().zip(&l).map(|(a, b)| a - b).collect()
        })
        .collect();
    let v: Vec<f64> = errs.iter().map(|e| p.v_gram.bilinear(e, e)).collect();
    let mut sq = p.mass.bilinear(&errs[0], &errs[0]);
    for k in 1..v.len() {
        sq += 0.5 * p.time.dt(k) * (v[k] + v[k - 1]);
    }
    Ok(sq.sqrt())
}

/// True error and effectivity `Delta / error`.
pub fn true_error_and_effectivity(
    model: &RbModel,
    truth: &TruthTrajectory,
    traj: &RbTrajectory,
    cert: &ErrorCertificate,
) -> Result<(f64, f64)> {
    let err = true_error(model, truth, traj)?;
    Ok((err, cert.delta_total / err))
}
