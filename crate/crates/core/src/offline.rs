//! Offline stage: POD-Greedy construction of the reduced space, Galerkin
//! projection of every parameter-independent operator, and the Riesz
//! representers of the affine residual terms.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eim::EimModel;
use crate::error::{Error, Result};
use crate::fem::{elem_gradient, weighted_stiffness, CoeffVector, ElemField};
use crate::linalg::{dot, SymTridiag};
use crate::online::{estimate, MonotonicityMode, OnlineSettings};
use crate::truth::{truth_solve, NewtonSettings, ProblemConfig, TruthProblem};

pub const RB_FORMAT_VERSION: u32 = 1;

/// V-orthonormal reduced basis `xi_1..xi_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbBasis {
    pub vectors: Vec<CoeffVector>,
}

impl RbBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Orthonormalizes `vectors` in the inner product induced by `gram`, dropping
    /// directions that are numerically dependent on earlier ones.
    pub fn orthonormalize(vectors: &[CoeffVector], gram: &SymTridiag) -> RbBasis {
        let mut basis = RbBasis { vectors: Vec::new() };
        for v in vectors {
            if let Some(xi) = basis.orthogonal_direction(v, gram) {
                basis.vectors.push(xi);
            }
        }
        basis
    }

    /// Normalized component of `v` orthogonal to the current span (two passes of
    /// modified Gram–Schmidt), or `None` if nothing is left.
    pub fn orthogonal_direction(&self, v: &[f64], gram: &SymTridiag) -> Option<CoeffVector> {
        let start = gram.bilinear(v, v).sqrt();
        if !(start > 0.0) {
            return None;
        }
        let mut w = v.to_vec();
        for _ in 0..2 {
            for xi in &self.vectors {
                let c = gram.bilinear(xi, &w);
                for (wi, x) in w.iter_mut().zip(xi) {
                    *wi -= c * x;
                }
            }
        }
        let norm = gram.bilinear(&w, &w).sqrt();
        if !(norm > 1e-10 * start) {
            return None;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        Some(w)
    }

    /// Coefficients in the nodal basis of `sum_j c_j xi_j`.
    pub fn lift(&self, coeffs: &[f64]) -> CoeffVector {
        let n = self.vectors.first().map_or(0, |v| v.len());
        let mut out = vec![0.0; n];
        for (c, xi) in coeffs.iter().zip(&self.vectors) {
            for (o, x) in out.iter_mut().zip(xi) {
                *o += c * x;
            }
        }
        out
    }

    /// `P_V u`, valid for a V-orthonormal basis.
    pub fn v_projection(&self, u: &[f64], gram: &SymTridiag) -> CoeffVector {
        let ku = gram.mul_vec(u);
        let coeffs: Vec<f64> = self.vectors.iter().map(|xi| dot(xi, &ku)).collect();
        self.lift(&coeffs)
    }
}

/// Parameter-independent reduced matrices and vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedOperators {
    /// `M_N = [<xi_i, xi_j>_H]`
    pub mass: DMatrix<f64>,
    /// `K_N = [<xi_i, xi_j>_V]`, the identity for an orthonormal basis.
    pub v_gram: DMatrix<f64>,
    /// `[a_m(xi_j, xi_i)]` for every EIM basis function.
    pub eim_blocks: Vec<DMatrix<f64>>,
    /// `[<g_q, xi_i>]` for every source term.
    pub sources: Vec<DVector<f64>>,
    /// `xi_j'` on the interpolation element of `q_m`, `M x N`.
    pub interp_gradients: DMatrix<f64>,
    /// H-projection of the initial state onto the reduced space.
    pub initial: DVector<f64>,
}

/// Label of one affine term of the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RieszTerm {
    Source(usize),
    TimeDerivative(usize),
    Eim { m: usize, j: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszData {
    /// V-Riesz representers of the residual terms, in `terms` order.
    pub representers: Vec<CoeffVector>,
    /// `G_R = [<v_q, v_q'>_V]`
    pub gram: DMatrix<f64>,
    pub terms: Vec<RieszTerm>,
    pub n_source: usize,
    pub n_basis: usize,
    pub n_eim: usize,
}

impl RieszData {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Position of a term in the layout `[sources | time derivatives | eim (m-major)]`.
    pub fn index(n_source: usize, n_basis: usize, term: RieszTerm) -> usize {
        match term {
            RieszTerm::Source(q) => q,
            RieszTerm::TimeDerivative(j) => n_source + j,
            RieszTerm::Eim { m, j } => n_source + n_basis + m * n_basis + j,
        }
    }

    fn layout(n_source: usize, n_basis: usize, n_eim: usize) -> Vec<RieszTerm> {
        let mut terms: Vec<RieszTerm> = (0..n_source).map(RieszTerm::Source).collect();
        terms.extend((0..n_basis).map(RieszTerm::TimeDerivative));
        for m in 0..n_eim {
            terms.extend((0..n_basis).map(|j| RieszTerm::Eim { m, j }));
        }
        terms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GreedyInit {
    /// `xi_1` is the normalized initial state.
    InitialState,
    /// Zero initial state: `xi_1` is the dominant POD mode of the trajectory at `mu`.
    TrajectoryMode { mu: f64 },
    /// Basis supplied by the caller.
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyLogEntry {
    /// Basis size at which the estimator sweep was run.
    pub basis_size: usize,
    #[serde(with = "crate::io::any_f64")]
    pub max_estimate: f64,
    pub argmax_mu: f64,
    pub enriched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyLog {
    pub init: GreedyInit,
    pub entries: Vec<GreedyLogEntry>,
    pub skipped: Vec<f64>,
}

impl GreedyLog {
    pub fn supplied() -> Self {
        GreedyLog {
            init: GreedyInit::Supplied,
            entries: Vec::new(),
            skipped: Vec::new(),
        }
    }
}

/// A reduced model with everything the online stage needs.
#[derive(Debug, Clone)]
pub struct RbModel {
    pub problem: Arc<TruthProblem>,
    pub basis: RbBasis,
    pub ops: ReducedOperators,
    pub riesz: RieszData,
    pub eim: EimModel,
    pub greedy_log: GreedyLog,
    /// `xi_j'` on every element; used only by the mesh-dependent parts of certification.
    pub basis_gradients: Vec<ElemField>,
    /// Free-form tags stored with the model file (config hash, seed).
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct RbModelFile {
    format_version: u32,
    problem: ProblemConfig,
    eim_hash: String,
    basis: RbBasis,
    ops: ReducedOperators,
    riesz: RieszData,
    eim: EimModel,
    greedy_log: GreedyLog,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl RbModel {
    pub fn from_basis(
        problem: Arc<TruthProblem>,
        eim: EimModel,
        basis: RbBasis,
        greedy_log: GreedyLog,
    ) -> Result<Self> {
        if basis.dim() == 0 {
            return Err(Error::InvalidInput("empty reduced basis".into()));
        }
        if eim.n_elem != problem.mesh.n_elem {
            return Err(Error::DimensionMismatch {
                expected: problem.mesh.n_elem,
                found: eim.n_elem,
            });
        }
        let ops = project_reduced_operators(&problem, &eim, &basis)?;
        let riesz = build_riesz(&problem, &eim, &basis)?;
        let basis_gradients = basis
            .vectors
            .iter()
            .map(|xi| elem_gradient(&problem.mesh, xi))
            .collect();
        Ok(RbModel {
            problem,
            basis,
            ops,
            riesz,
            eim,
            greedy_log,
            basis_gradients,
            metadata: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.basis.dim()
    }

    pub fn m(&self) -> usize {
        self.eim.dim()
    }

    /// Restriction to the first `n` basis vectors and the first `m` EIM terms.
    /// Needs no high-dimensional work: every block is a leading sub-block.
    pub fn truncated(&self, n: usize, m: usize) -> Result<RbModel> {
        if n == 0 || n > self.n() || m == 0 || m > self.m() {
            return Err(Error::InvalidInput(format!(
                "cannot truncate (N, M) = ({}, {}) to ({n}, {m})",
                self.n(),
                self.m()
            )));
        }
        let nq = self.riesz.n_source;
        let sub = |a: &DMatrix<f64>| a.view((0, 0), (n, n)).into_owned();
        let ops = ReducedOperators {
            mass: sub(&self.ops.mass),
            v_gram: sub(&self.ops.v_gram),
            eim_blocks: self.ops.eim_blocks[..m].iter().map(sub).collect(),
            sources: self
                .ops
                .sources
                .iter()
                .map(|g| g.rows(0, n).into_owned())
                .collect(),
            interp_gradients: self.ops.interp_gradients.view((0, 0), (m, n)).into_owned(),
            initial: self.ops.initial.rows(0, n).into_owned(),
        };
        let terms = RieszData::layout(nq, n, m);
        let old: Vec<usize> = terms
            .iter()
            .map(|&t| RieszData::index(nq, self.n(), t))
            .collect();
        let gram = DMatrix::from_fn(old.len(), old.len(), |i, j| self.riesz.gram[(old[i], old[j])]);
        let riesz = RieszData {
            representers: old.iter().map(|&i| self.riesz.representers[i].clone()).collect(),
            gram,
            terms,
            n_source: nq,
            n_basis: n,
            n_eim: m,
        };
        Ok(RbModel {
            problem: self.problem.clone(),
            basis: RbBasis {
                vectors: self.basis.vectors[..n].to_vec(),
            },
            ops,
            riesz,
            eim: self.eim.truncated(m)?,
            greedy_log: self.greedy_log.clone(),
            basis_gradients: self.basis_gradients[..n].to_vec(),
            metadata: self.metadata.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let problem = self.problem.config.clone().ok_or_else(|| {
            Error::InvalidInput("only models of config-built problems can be saved".into())
        })?;
        let file = RbModelFile {
            format_version: RB_FORMAT_VERSION,
            problem,
            eim_hash: eim_hash(&self.eim)?,
            basis: self.basis.clone(),
            ops: self.ops.clone(),
            riesz: self.riesz.clone(),
            eim: self.eim.clone(),
            greedy_log: self.greedy_log.clone(),
            metadata: self.metadata.clone(),
        };
        crate::io::save_json(path, &file)
    }

    pub fn load(path: &Path) -> Result<RbModel> {
        let file: RbModelFile = crate::io::load_json(path)?;
        if file.format_version != RB_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                expected: RB_FORMAT_VERSION,
                found: file.format_version,
            });
        }
        if eim_hash(&file.eim)? != file.eim_hash {
            return Err(Error::InvalidInput(format!(
                "{}: embedded EIM model does not match its recorded hash",
                path.display()
            )));
        }
        let problem = Arc::new(TruthProblem::from_config(&file.problem)?);
        let basis_gradients = file
            .basis
            .vectors
            .iter()
            .map(|xi| elem_gradient(&problem.mesh, xi))
            .collect();
        Ok(RbModel {
            problem,
            basis: file.basis,
            ops: file.ops,
            riesz: file.riesz,
            eim: file.eim,
            greedy_log: file.greedy_log,
            basis_gradients,
            metadata: file.metadata,
        })
    }
}

/// SHA-256 of the canonical serialization of an EIM model.
pub fn eim_hash(eim: &EimModel) -> Result<String> {
    let bytes = serde_json::to_vec(eim)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Dominant POD mode of the snapshots in the V inner product, normalized in V.
pub fn pod1(snapshots: &[CoeffVector], v_gram: &SymTridiag) -> Result<CoeffVector> {
    let count = snapshots.len();
    if count == 0 {
        return Err(Error::DegenerateMode);
    }
    let k_snap: Vec<Vec<f64>> = snapshots.iter().map(|e| v_gram.mul_vec(e)).collect();
    let mut corr = DMatrix::zeros(count, count);
    for i in 0..count {
        for j in 0..=i {
            let c = dot(&snapshots[i], &k_snap[j]);
            corr[(i, j)] = c;
            corr[(j, i)] = c;
        }
    }
    if corr.diagonal().iter().all(|&d| d <= 0.0) {
        return Err(Error::DegenerateMode);
    }
    let eig = SymmetricEigen::new(corr);
    let (top, lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    if !(lambda > 0.0) {
        return Err(Error::DegenerateMode);
    }
    let w = eig.eigenvectors.column(top);
    let mut mode = vec![0.0; snapshots[0].len()];
    for (c, e) in w.iter().zip(snapshots) {
        for (m, x) in mode.iter_mut().zip(e) {
            *m += c * x;
        }
    }
    let norm = v_gram.bilinear(&mode, &mode).sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateMode);
    }
    mode.iter_mut().for_each(|x| *x /= norm);
    Ok(mode)
}

fn gram_in(basis: &RbBasis, op: &SymTridiag) -> DMatrix<f64> {
    let n = basis.dim();
    let applied: Vec<Vec<f64>> = basis.vectors.iter().map(|xi| op.mul_vec(xi)).collect();
    DMatrix::from_fn(n, n, |i, j| dot(&basis.vectors[i], &applied[j]))
}

/// Galerkin projection of all parameter-independent operators onto the basis.
pub fn project_reduced_operators(
    problem: &TruthProblem,
    eim: &EimModel,
    basis: &RbBasis,
) -> Result<ReducedOperators> {
    let n = basis.dim();
    let mass = gram_in(basis, &problem.mass);
    let v_gram = gram_in(basis, &problem.v_gram);
    let eim_blocks = eim
        .basis
        .iter()
        .map(|q| Ok(gram_in(basis, &weighted_stiffness(&problem.mesh, q)?)))
        .collect::<Result<Vec<_>>>()?;
    let sources = problem
        .source_loads
        .iter()
        .map(|load| DVector::from_iterator(n, basis.vectors.iter().map(|xi| dot(xi, load))))
        .collect();
    let grads: Vec<ElemField> = basis
        .vectors
        .iter()
        .map(|xi| elem_gradient(&problem.mesh, xi))
        .collect();
    let interp_gradients =
        DMatrix::from_fn(eim.dim(), n, |m, j| grads[j][eim.interp_indices[m]]);
    let u0 = problem.initial_state()?;
    let mu0 = problem.mass.mul_vec(&u0);
    let rhs = DVector::from_iterator(n, basis.vectors.iter().map(|xi| dot(xi, &mu0)));
    let initial = if rhs.iter().all(|v| *v == 0.0) {
        rhs
    } else {
        mass.clone()
            .cholesky()
            .ok_or(Error::SingularMatrix { row: 0, pivot: 0.0 })?
            .solve(&rhs)
    };
    Ok(ReducedOperators {
        mass,
        v_gram,
        eim_blocks,
        sources,
        interp_gradients,
        initial,
    })
}

/// V-Riesz representers of every affine residual term and their Gram matrix.
pub fn build_riesz(problem: &TruthProblem, eim: &EimModel, basis: &RbBasis) -> Result<RieszData> {
    let chol = problem.v_gram.cholesky()?;
    let n = basis.dim();
    let nq = problem.source_loads.len();
    let terms = RieszData::layout(nq, n, eim.dim());
    let stiff: Vec<SymTridiag> = eim
        .basis
        .iter()
        .map(|q| weighted_stiffness(&problem.mesh, q))
        .collect::<Result<_>>()?;
    let functionals: Vec<Vec<f64>> = terms
        .iter()
        .map(|t| match *t {
            RieszTerm::Source(q) => problem.source_loads[q].clone(),
            RieszTerm::TimeDerivative(j) => problem.mass.mul_vec(&basis.vectors[j]),
            RieszTerm::Eim { m, j } => stiff[m].mul_vec(&basis.vectors[j]),
        })
        .collect();
    let representers: Vec<Vec<f64>> = functionals.iter().map(|f| chol.solve(f)).collect();
    let q = terms.len();
    // <v_q, v_q'>_V = v_q' K v_q' = v_q . f_q'
    let mut gram = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in 0..=i {
            let g = 0.5 * (dot(&representers[i], &functionals[j]) + dot(&representers[j], &functionals[i]));
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    Ok(RieszData {
        representers,
        gram,
        terms,
        n_source: nq,
        n_basis: n,
        n_eim: eim.dim(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedySettings {
    pub tol: f64,
    /// Basis size below which the tolerance does not stop the enrichment.
    pub n_min: usize,
    pub n_max: usize,
    pub truth: NewtonSettings,
    pub online: OnlineSettings,
    pub m_a_mode: MonotonicityMode,
}

impl Default for GreedySettings {
    fn default() -> Self {
        GreedySettings {
            tol: 1e-5,
            n_min: 1,
            n_max: 7,
            truth: NewtonSettings::default(),
            online: OnlineSettings::default(),
            m_a_mode: MonotonicityMode::Analytic,
        }
    }
}

/// POD-Greedy: enrich the basis with the dominant POD mode of the projection error
/// at the parameter where the certified estimator is largest.
pub fn pod_greedy(
    problem: Arc<TruthProblem>,
    eim: &EimModel,
    train: &[f64],
    settings: &GreedySettings,
) -> Result<RbModel> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if settings.n_max == 0 || settings.tol.is_nan() {
        return Err(Error::InvalidInput("greedy needs N_max >= 1 and a tolerance".into()));
    }
    for &mu in train {
        problem.domain.check(mu)?;
    }
    let truth_at = |mu: f64| {
        truth_solve(&problem, mu, &settings.truth).map_err(|e| Error::TruthSolve {
            mu,
            source: Box::new(e),
        })
    };

    let u0 = problem.initial_state()?;
    let (first, init) = if problem.v_gram.bilinear(&u0, &u0) > 0.0 {
        let norm = problem.v_gram.bilinear(&u0, &u0).sqrt();
        (u0.iter().map(|x| x / norm).collect(), GreedyInit::InitialState)
    } else {
        let lo = train.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = train.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let center = 0.5 * (lo + hi);
        let mu = train
            .iter()
            .cloned()
            .fold(train[0], |b, m| if (m - center).abs() < (b - center).abs() { m } else { b });
        let traj = truth_at(mu)?;
        (pod1(&traj.states[1..], &problem.v_gram)?, GreedyInit::TrajectoryMode { mu })
    };
    let mut log = GreedyLog {
        init,
        entries: Vec::new(),
        skipped: Vec::new(),
    };
    let mut basis = RbBasis { vectors: vec![first] };
    let mut model = RbModel::from_basis(problem.clone(), eim.clone(), basis.clone(), log.clone())?;
    let mut active: Vec<f64> = train.to_vec();

    loop {
        let estimates: Vec<f64> = active
            .par_iter()
            .map(|&mu| match estimate(&model, mu, &settings.online, settings.m_a_mode) {
                Ok(cert) => cert.delta_total,
                Err(err) => {
                    log::warn!("reduced solve failed at mu = {mu}: {err}");
                    f64::INFINITY
                }
            })
            .collect();
        let mut best = 0;
        for (i, &e) in estimates.iter().enumerate() {
            if e > estimates[best] || (estimates[best].is_nan() && !e.is_nan()) {
                best = i;
            }
        }
        let eps = estimates[best];
        let mu = active[best];
        let done = (eps <= settings.tol && basis.dim() >= settings.n_min) || basis.dim() >= settings.n_max;
        log.entries.push(GreedyLogEntry {
            basis_size: basis.dim(),
            max_estimate: eps,
            argmax_mu: mu,
            enriched: !done,
        });
        log::info!("greedy: N = {}, max estimate {eps:.3e} at mu = {mu}", basis.dim());
        if done {
            break;
        }
        let traj = truth_at(mu)?;
        let errors: Vec<CoeffVector> = traj.states[1..]
            .iter()
            .map(|u| {
                let p = basis.v_projection(u, &problem.v_gram);
                u.iter().zip(&p).map(|(a, b)| a - b).collect()
            })
            .collect();
        let next = match pod1(&errors, &problem.v_gram) {
            Ok(mode) => basis.orthogonal_direction(&mode, &problem.v_gram),
            Err(Error::DegenerateMode) => None,
            Err(e) => return Err(e),
        };
        let Some(xi) = next else {
            log::warn!("no new direction at mu = {mu}; removing it from the training set");
            log.skipped.push(mu);
            if let Some(last) = log.entries.last_mut() {
                last.enriched = false;
            }
            active.remove(best);
            if active.is_empty() {
                break;
            }
            continue;
        };
        basis.vectors.push(xi);
        model = RbModel::from_basis(problem.clone(), eim.clone(), basis.clone(), log.clone())?;
    }
    model.greedy_log = log;
    Ok(model)
}
