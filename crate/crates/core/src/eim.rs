//! Greedy empirical interpolation of the nonlinearity field.
//!
//! The interpolant of a field `f` is `sum_m phi_m q_m` with `B phi = f(x_1..x_M)`,
//! `B_ij = q_j(x_i)`. Interpolation points are element indices: the field is
//! constant per element, so the discrete maximum over elements is the maximum
//! over the domain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fem::ElemField;
use crate::linalg::forward_substitute;
use crate::truth::{truth_solve, NewtonSettings, Nonlinearity, TruthProblem};

pub const EIM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub mu: f64,
    /// Time level, `1..=K`.
    pub step: usize,
    pub values: ElemField,
}

/// Nonlinearity fields `nu(|u_h^k'|; mu)` over the training parameters and time levels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnapshotBank {
    pub n_elem: usize,
    pub entries: Vec<BankEntry>,
}

impl SnapshotBank {
    pub fn new(n_elem: usize) -> Self {
        SnapshotBank {
            n_elem,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, mu: f64, step: usize, values: ElemField) -> Result<()> {
        check_len(self.n_elem, values.len())?;
        self.entries.push(BankEntry { mu, step, values });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Runs the truth solver at every parameter (in parallel) and stores the
    /// nonlinearity field of every time level `k = 1..=K`.
    pub fn from_truth(
        problem: &TruthProblem,
        params: &[f64],
        settings: &NewtonSettings,
    ) -> Result<Self> {
        let per_param: Vec<Vec<BankEntry>> = params
            .par_iter()
            .map(|&mu| {
                let traj = truth_solve(problem, mu, settings).map_err(|e| Error::TruthSolve {
                    mu,
                    source: Box::new(e),
                })?;
                Ok(traj
                    .states
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, u)| BankEntry {
                        mu,
                        step: k,
                        values: problem.nonlinearity_field(u, mu),
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(SnapshotBank {
            n_elem: problem.mesh.n_elem,
            entries: per_param.into_iter().flatten().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EimLogEntry {
    pub mu: f64,
    pub step: usize,
    /// Index of the selected field in the bank.
    pub bank_index: usize,
    /// Max-norm interpolation error over the bank before this basis function was added.
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EimModel {
    pub format_version: u32,
    pub n_elem: usize,
    /// `q_1..q_M`
    pub basis: Vec<ElemField>,
    pub interp_indices: Vec<usize>,
    /// `B`, row-major `M x M`, lower triangular with unit diagonal.
    pub interp_matrix: Vec<f64>,
    pub training_log: Vec<EimLogEntry>,
    /// Set when the bank had fewer independent directions than requested and the
    /// greedy loop stopped with a single basis function.
    pub degenerate: bool,
}

impl EimModel {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.interp_matrix[i * self.dim() + j]
    }

    /// The first `m` stages of the greedy construction.
    pub fn truncated(&self, m: usize) -> Result<EimModel> {
        if m == 0 || m > self.dim() {
            return Err(Error::InvalidInput(format!(
                "cannot truncate an EIM model of dimension {} to {m}",
                self.dim()
            )));
        }
        let full = self.dim();
        let mut b = Vec::with_capacity(m * m);
        for i in 0..m {
            b.extend_from_slice(&self.interp_matrix[i * full..i * full + m]);
        }
        Ok(EimModel {
            format_version: self.format_version,
            n_elem: self.n_elem,
            basis: self.basis[..m].to_vec(),
            interp_indices: self.interp_indices[..m].to_vec(),
            interp_matrix: b,
            training_log: self.training_log[..m].to_vec(),
            degenerate: self.degenerate,
        })
    }

    pub(crate) fn coefficients_into(&self, point_values: &[f64], out: &mut [f64]) {
        forward_substitute(&self.interp_matrix, point_values, out, self.dim());
    }

    /// Evaluates `sum_m phi_m q_m` on element `e`.
    #[inline]
    pub fn eval_at(&self, coeffs: &[f64], e: usize) -> f64 {
        coeffs.iter().zip(&self.basis).map(|(c, q)| c * q[e]).sum()
    }
}

/// Greedy construction. Stops after `m_max` basis functions or once the largest
/// interpolation error over the bank is at most `tol`.
pub fn eim_build(bank: &SnapshotBank, tol: f64, m_max: usize) -> Result<EimModel> {
    if bank.is_empty() {
        return Err(Error::InvalidInput("empty snapshot bank".into()));
    }
    if m_max == 0 || tol < 0.0 || !tol.is_finite() {
        return Err(Error::InvalidInput(format!(
            "EIM needs M_max >= 1 and a finite tolerance >= 0 (got {m_max}, {tol})"
        )));
    }
    let n_elem = bank.n_elem;
    let mut residuals: Vec<Vec<f64>> = bank.entries.iter().map(|e| e.values.clone()).collect();
    let mut basis: Vec<ElemField> = Vec::new();
    let mut interp_indices = Vec::new();
    let mut log = Vec::new();
    let mut degenerate = false;

    while basis.len() < m_max {
        let norms: Vec<f64> = residuals
            .par_iter()
            .map(|r| r.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect();
        let (best, delta) = argmax(&norms);
        if basis.is_empty() && delta == 0.0 {
            log::warn!("EIM bank is identically zero; returning a trivial one-term model");
            let mut q = vec![0.0; n_elem];
            q[0] = 1.0;
            basis.push(q);
            interp_indices.push(0);
            log.push(EimLogEntry {
                mu: bank.entries[0].mu,
                step: bank.entries[0].step,
                bank_index: 0,
                max_residual: 0.0,
            });
            degenerate = true;
            break;
        }
        if !basis.is_empty() {
            if delta == 0.0 || delta <= 1e-14 * log_first(&log) {
                if basis.len() == 1 {
                    log::warn!("EIM bank is one-dimensional; stopping with M = 1");
                    degenerate = true;
                }
                break;
            }
            if delta <= tol {
                break;
            }
        }
        let r = &residuals[best];
        let (x, _) = argmax(&r.iter().map(|v| v.abs()).collect::<Vec<_>>());
        let pivot = r[x];
        let q: ElemField = r.iter().map(|v| v / pivot).collect();
        log.push(EimLogEntry {
            mu: bank.entries[best].mu,
            step: bank.entries[best].step,
            bank_index: best,
            max_residual: delta,
        });
        residuals.par_iter_mut().for_each(|r| {
            let c = r[x];
            if c != 0.0 {
                for (ri, qi) in r.iter_mut().zip(&q) {
                    *ri -= c * qi;
                }
            }
        });
        basis.push(q);
        interp_indices.push(x);
    }

    let m = basis.len();
    let mut b = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..i {
            b[i * m + j] = basis[j][interp_indices[i]];
        }
        b[i * m + i] = 1.0;
    }
    Ok(EimModel {
        format_version: EIM_FORMAT_VERSION,
        n_elem,
        basis,
        interp_indices,
        interp_matrix: b,
        training_log: log,
        degenerate,
    })
}

fn log_first(log: &[EimLogEntry]) -> f64 {
    log.first().map_or(0.0, |e| e.max_residual)
}

/// Index and value of the largest entry; the lowest index wins ties.
fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut val = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > val {
            best = i;
            val = v;
        }
    }
    (best, val)
}

/// `phi = B^{-1} v`
pub fn eim_coefficients(model: &EimModel, point_values: &[f64]) -> Result<Vec<f64>> {
    check_len(model.dim(), point_values.len())?;
    let mut out = vec![0.0; model.dim()];
    model.coefficients_into(point_values, &mut out);
    Ok(out)
}

pub fn eim_interpolate(model: &EimModel, source: &[f64]) -> Result<ElemField> {
    check_len(model.n_elem, source.len())?;
    let values: Vec<f64> = model.interp_indices.iter().map(|&e| source[e]).collect();
    let coeffs = eim_coefficients(model, &values)?;
    Ok((0..model.n_elem).map(|e| model.eval_at(&coeffs, e)).collect())
}

/// Largest deviation between the interpolated and the exact nonlinearity over all
/// supplied gradient fields.
pub fn delta_m(
    model: &EimModel,
    nonlinearity: &dyn Nonlinearity,
    gradients: &[ElemField],
    mu: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut values = vec![0.0; model.dim()];
    let mut coeffs = vec![0.0; model.dim()];
    for g in gradients {
        check_len(model.n_elem, g.len())?;
        for (v, &e) in values.iter_mut().zip(&model.interp_indices) {
            *v = nonlinearity.value(g[e].abs(), mu);
        }
        model.coefficients_into(&values, &mut coeffs);
        for (e, ge) in g.iter().enumerate() {
            let err = (model.eval_at(&coeffs, e) - nonlinearity.value(ge.abs(), mu)).abs();
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truth::{ProblemConfig, Reluctivity};
    use proptest::prelude::*;

    fn field(n: usize, f: impl Fn(f64) -> f64) -> ElemField {
        (0..n).map(|e| f((e as f64 + 0.5) / n as f64)).collect()
    }

    fn smooth_bank(n_elem: usize) -> SnapshotBank {
        let mut bank = SnapshotBank::new(n_elem);
        for (p, mu) in [1.0, 2.0, 3.0, 4.0, 5.0].iter().enumerate() {
            for k in 1..=6 {
                let t = k as f64 / 6.0;
                let f = field(n_elem, |x| {
                    1.0 + (mu * t * (2.0 * std::f64::consts::PI * x).cos().powi(2)).exp() * 0.1
                        + 0.05 * (p as f64) * x
                });
                bank.push(*mu, k, f).unwrap();
            }
        }
        bank
    }

    #[test]
    fn single_field_bank() {
        let mut bank = SnapshotBank::new(5);
        let f = vec![1.0, -3.0, 2.0, 0.5, 1.5];
        for k in 1..4 {
            bank.push(2.0, k, f.clone()).unwrap();
        }
        let model = eim_build(&bank, 0.0, 4).unwrap();
        assert_eq!(model.dim(), 1);
        assert!(model.degenerate);
        assert_eq!(model.interp_indices, vec![1]);
        let expect: Vec<f64> = f.iter().map(|v| v / -3.0).collect();
        assert_eq!(model.basis[0], expect);
    }

    #[test]
    fn zero_bank_is_degenerate() {
        let mut bank = SnapshotBank::new(4);
        bank.push(1.0, 1, vec![0.0; 4]).unwrap();
        let model = eim_build(&bank, 0.0, 3).unwrap();
        assert_eq!(model.dim(), 1);
        assert!(model.degenerate);
        assert_eq!(eim_interpolate(&model, &[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn two_independent_fields_are_reproduced() {
        let mut bank = SnapshotBank::new(6);
        let f1 = vec![1.0, 2.0, 3.0, 2.0, 1.0, 0.5];
        let f2 = vec![0.3, -1.0, 0.2, 4.0, 0.1, 0.0];
        bank.push(1.0, 1, f1.clone()).unwrap();
        bank.push(1.0, 2, f2.clone()).unwrap();
        let model = eim_build(&bank, 0.0, 2).unwrap();
        assert_eq!(model.dim(), 2);
        for f in [&f1, &f2] {
            let g = eim_interpolate(&model, f).unwrap();
            for e in 0..6 {
                assert!((g[e] - f[e]).abs() < 1e-12);
            }
        }
        // 2x2 oracle: solve [q1(x1) q2(x1); q1(x2) q2(x2)] c = f(x)
        let (x1, x2) = (model.interp_indices[0], model.interp_indices[1]);
        let (q1, q2) = (&model.basis[0], &model.basis[1]);
        let det = q1[x1] * q2[x2] - q2[x1] * q1[x2];
        let c1 = (f2[x1] * q2[x2] - q2[x1] * f2[x2]) / det;
        let c2 = (q1[x1] * f2[x2] - f2[x1] * q1[x2]) / det;
        let phi = eim_coefficients(&model, &[f2[x1], f2[x2]]).unwrap();
        assert!((phi[0] - c1).abs() < 1e-12 && (phi[1] - c2).abs() < 1e-12);
    }

    #[test]
    fn interpolation_matrix_structure() {
        let model = eim_build(&smooth_bank(40), 0.0, 6).unwrap();
        let m = model.dim();
        assert_eq!(m, 6);
        for i in 0..m {
            assert_eq!(model.b(i, i), 1.0);
            for j in i + 1..m {
                assert_eq!(model.b(i, j), 0.0);
            }
            for j in 0..m {
                assert_eq!(model.b(i, j), model.basis[j][model.interp_indices[i]]);
            }
            assert_eq!(model.basis[i].iter().fold(0.0_f64, |a, v| a.max(v.abs())), 1.0);
        }
        let mut idx = model.interp_indices.clone();
        idx.sort();
        idx.dedup();
        assert_eq!(idx.len(), m);
        let log = &model.training_log;
        assert!(log[m - 1].max_residual <= log[0].max_residual);
    }

    #[test]
    fn basis_fields_map_to_unit_coefficients() {
        let model = eim_build(&smooth_bank(30), 0.0, 5).unwrap();
        for j in 0..model.dim() {
            let col: Vec<f64> = (0..model.dim()).map(|i| model.b(i, j)).collect();
            let phi = eim_coefficients(&model, &col).unwrap();
            for (i, p) in phi.iter().enumerate() {
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
            let q = eim_interpolate(&model, &model.basis[j]).unwrap();
            assert!(q.iter().zip(&model.basis[j]).all(|(a, b)| (a - b).abs() < 1e-13));
        }
        assert_eq!(eim_coefficients(&model, &[0.0; 5]).unwrap(), vec![0.0; 5]);
        assert!(eim_coefficients(&model, &[0.0; 4]).is_err());
    }

    #[test]
    fn selected_snapshots_are_interpolated_exactly() {
        let bank = smooth_bank(50);
        let model = eim_build(&bank, 0.0, 7).unwrap();
        for entry in &model.training_log {
            let f = &bank.entries[entry.bank_index].values;
            let g = eim_interpolate(&model, f).unwrap();
            for &x in &model.interp_indices {
                assert!((g[x] - f[x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nested_models_agree() {
        let bank = smooth_bank(35);
        let big = eim_build(&bank, 0.0, 6).unwrap();
        let small = eim_build(&bank, 0.0, 4).unwrap();
        assert_eq!(big.truncated(4).unwrap(), small);
    }

    #[test]
    fn tolerance_stops_early() {
        let bank = smooth_bank(35);
        let full = eim_build(&bank, 0.0, 6).unwrap();
        let tol = full.training_log[3].max_residual * 1.0001;
        let stopped = eim_build(&bank, tol, 6).unwrap();
        assert_eq!(stopped.dim(), 3);
    }

    #[test]
    fn delta_m_zero_in_span() {
        // nu constant: every nonlinearity field is the constant 3, one basis function
        let mut bank = SnapshotBank::new(8);
        bank.push(1.0, 1, vec![3.0; 8]).unwrap();
        let model = eim_build(&bank, 0.0, 1).unwrap();
        let nl = Reluctivity::Constant { value: 3.0 };
        let grads = vec![field(8, |x| x), field(8, |x| -2.0 * x * x)];
        assert!(delta_m(&model, &nl, &grads, 1.0).unwrap() <= 1e-12);
        let nl = Reluctivity::Exponential;
        assert!(delta_m(&model, &nl, &grads, 1.0).unwrap() > 1e-3);
    }

    #[test]
    fn bank_from_truth_uses_all_steps() {
        let mut cfg = ProblemConfig::magnetoquasistatic_1d();
        cfg.n_elem = 20;
        cfg.steps = 10;
        let problem = TruthProblem::from_config(&cfg).unwrap();
        let bank = SnapshotBank::from_truth(&problem, &[1.0, 5.5], &NewtonSettings::default()).unwrap();
        assert_eq!(bank.len(), 20);
        assert_eq!(bank.entries[10].step, 1);
        assert_eq!(bank.entries[10].mu, 5.5);
        assert!(bank.entries.iter().flat_map(|e| &e.values).all(|v| *v >= 2.0));
    }

    proptest! {
        #[test]
        fn forward_substitution_residual_is_small(v in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let model = eim_build(&smooth_bank(40), 0.0, 6).unwrap();
            let phi = eim_coefficients(&model, &v).unwrap();
            for i in 0..6 {
                let r: f64 = (0..6).map(|j| model.b(i, j) * phi[j]).sum();
                prop_assert!((r - v[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn span_members_are_reproduced(c in proptest::collection::vec(-2.0f64..2.0, 5)) {
            let model = eim_build(&smooth_bank(40), 0.0, 5).unwrap();
            let f: Vec<f64> = (0..40).map(|e| model.eval_at(&c, e)).collect();
            let g = eim_interpolate(&model, &f).unwrap();
            for e in 0..40 {
                prop_assert!((g[e] - f[e]).abs() < 1e-12);
            }
        }
    }
}
