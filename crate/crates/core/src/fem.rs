//! Piecewise-linear finite elements on the unit interval with homogeneous
//! Dirichlet conditions.
//!
//! Degree of freedom `i` sits at node `(i + 1) h`; element `e` spans
//! `[e h, (e + 1) h]`. Gradients of P1 functions are constant per element, so
//! every solution-dependent coefficient is carried as one value per element
//! and the weighted stiffness integrals are exact.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::SymTridiag;

/// Nodal coefficients of a function in the P1 space (boundary nodes excluded).
pub type CoeffVector = Vec<f64>;

/// One value per element.
pub type ElemField = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    pub n_elem: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub elem_midpoints: Vec<f64>,
}

impl Mesh1D {
    pub fn uniform(n_elem: usize) -> Result<Self> {
        if n_elem < 2 {
            return Err(Error::InvalidInput(format!(
                "a mesh needs at least 2 elements, got {n_elem}"
            )));
        }
        let h = 1.0 / n_elem as f64;
        let nodes = (1..n_elem).map(|i| i as f64 * h).collect();
        let elem_midpoints = (0..n_elem).map(|e| (e as f64 + 0.5) * h).collect();
        Ok(Mesh1D {
            n_elem,
            h,
            nodes,
            elem_midpoints,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.n_elem - 1
    }

    /// Dof indices of the left and right node of element `e` (`None` on the boundary).
    #[inline]
    pub fn elem_dofs(&self, e: usize) -> (Option<usize>, Option<usize>) {
        let left = if e == 0 { None } else { Some(e - 1) };
        let right = if e + 1 == self.n_elem { None } else { Some(e) };
        (left, right)
    }
}

pub fn build_mesh(n_elem: usize) -> Result<Mesh1D> {
    Mesh1D::uniform(n_elem)
}

/// L2 Gram matrix of the hat functions.
pub fn assemble_mass(mesh: &Mesh1D) -> SymTridiag {
    let n = mesh.n_dof();
    let h = mesh.h;
    SymTridiag {
        diag: vec![2.0 * h / 3.0; n],
        off: vec![h / 6.0; n.saturating_sub(1)],
    }
}

/// Gram matrix of the V inner product `(u', v')`.
pub fn assemble_v_gram(mesh: &Mesh1D) -> SymTridiag {
    let n = mesh.n_dof();
    let h = mesh.h;
    SymTridiag {
        diag: vec![2.0 / h; n],
        off: vec![-1.0 / h; n.saturating_sub(1)],
    }
}

/// Stiffness matrix with an element-wise constant weight: `sum_e w_e int_e phi_i' phi_j'`.
pub fn weighted_stiffness(mesh: &Mesh1D, w: &[f64]) -> Result<SymTridiag> {
    check_len(mesh.n_elem, w.len())?;
    let mut a = SymTridiag::zeros(mesh.n_dof());
    weighted_stiffness_into(mesh, w, &mut a);
    Ok(a)
}

pub(crate) fn weighted_stiffness_into(mesh: &Mesh1D, w: &[f64], a: &mut SymTridiag) {
    let inv_h = 1.0 / mesh.h;
    let n = mesh.n_dof();
    for i in 0..n {
        // dof i touches elements i (as right node) and i + 1 (as left node)
        a.diag[i] = (w[i] + w[i + 1]) * inv_h;
        if i + 1 < n {
            a.off[i] = -w[i + 1] * inv_h;
        }
    }
}

/// `A(w) u` without forming the matrix.
pub(crate) fn weighted_stiffness_apply(mesh: &Mesh1D, w: &[f64], u: &[f64], out: &mut [f64]) {
    let inv_h = 1.0 / mesh.h;
    let n = mesh.n_dof();
    for i in 0..n {
        let left = if i > 0 { u[i - 1] } else { 0.0 };
        let right = if i + 1 < n { u[i + 1] } else { 0.0 };
        out[i] = inv_h * (w[i] * (u[i] - left) + w[i + 1] * (u[i] - right));
    }
}

/// Element-wise derivative of the P1 function with coefficients `u`.
pub fn elem_gradient(mesh: &Mesh1D, u: &[f64]) -> ElemField {
    let mut g = vec![0.0; mesh.n_elem];
    elem_gradient_into(mesh, u, &mut g);
    g
}

pub(crate) fn elem_gradient_into(mesh: &Mesh1D, u: &[f64], g: &mut [f64]) {
    let inv_h = 1.0 / mesh.h;
    let n = mesh.n_dof();
    for (e, ge) in g.iter_mut().enumerate() {
        let left = if e == 0 { 0.0 } else { u[e - 1] };
        let right = if e == n { 0.0 } else { u[e] };
        *ge = (right - left) * inv_h;
    }
}

/// `b_i = int f phi_i`, two-point Gauss rule per element.
pub fn load_vector<F: Fn(f64) -> f64>(mesh: &Mesh1D, f: F) -> CoeffVector {
    let h = mesh.h;
    let offset = 0.5 * h / 3f64.sqrt();
    let mut b = vec![0.0; mesh.n_dof()];
    for e in 0..mesh.n_elem {
        let x0 = e as f64 * h;
        let mid = mesh.elem_midpoints[e];
        let (left, right) = mesh.elem_dofs(e);
        for x in [mid - offset, mid + offset] {
            let fx = f(x) * 0.5 * h;
            let xi = (x - x0) / h;
            if let Some(l) = left {
                b[l] += fx * (1.0 - xi);
            }
            if let Some(r) = right {
                b[r] += fx * xi;
            }
        }
    }
    b
}

/// L2-orthogonal projection onto the P1 space.
pub fn h_project<F: Fn(f64) -> f64>(mesh: &Mesh1D, f: F) -> Result<CoeffVector> {
    let mut b = load_vector(mesh, f);
    assemble_mass(mesh).solve_in_place(&mut b)?;
    Ok(b)
}

/// Evaluates the P1 function with coefficients `u` at `x`.
pub fn eval_p1(mesh: &Mesh1D, u: &[f64], x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let e = ((x / mesh.h).floor() as usize).min(mesh.n_elem - 1);
    let xi = (x - e as f64 * mesh.h) / mesh.h;
    let (left, right) = mesh.elem_dofs(e);
    let ul = left.map_or(0.0, |l| u[l]);
    let ur = right.map_or(0.0, |r| u[r]);
    ul * (1.0 - xi) + ur * xi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use std::f64::consts::PI;

    // Element matrices integrated symbolically: int_e phi_a phi_b = h/3 (a = b),
    // h/6 (a != b); int_e phi_a' phi_b' = +-1/h.
    fn reference_global(mesh: &Mesh1D, mass: bool, w: &[f64]) -> nalgebra::DMatrix<f64> {
        let n = mesh.n_dof();
        let h = mesh.h;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for e in 0..mesh.n_elem {
            let local = if mass {
                [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]]
            } else {
                [[w[e] / h, -w[e] / h], [-w[e] / h, w[e] / h]]
            };
            let dofs = [
                if e == 0 { None } else { Some(e - 1) },
                if e == mesh.n_elem - 1 { None } else { Some(e) },
            ];
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                        m[(i, j)] += local[a][b];
                    }
                }
            }
        }
        m
    }

    #[test]
    fn mesh_sizes() {
        // 100 subintervals leave 99 interior nodes; 98 interior nodes need 99 subintervals
        assert_eq!(build_mesh(100).unwrap().n_dof(), 99);
        assert_eq!(build_mesh(99).unwrap().n_dof(), 98);
        let m2 = build_mesh(2).unwrap();
        assert_eq!(m2.n_dof(), 1);
        assert_eq!(m2.nodes, vec![0.5]);
        let m4 = build_mesh(4).unwrap();
        assert_eq!(m4.elem_midpoints, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(build_mesh(1).is_err());
        assert!(build_mesh(0).is_err());
    }

    #[test]
    fn nodes_strictly_increasing_inside_interval() {
        let m = build_mesh(37).unwrap();
        for (i, x) in m.nodes.iter().enumerate() {
            assert!((x - (i + 1) as f64 * m.h).abs() < 1e-15);
            assert!(*x > 0.0 && *x < 1.0);
        }
        assert!(m.nodes.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn mass_and_gram_match_element_integration() {
        for n_elem in [2, 3, 10] {
            let mesh = build_mesh(n_elem).unwrap();
            let ones = vec![1.0; n_elem];
            let m = assemble_mass(&mesh).to_dense();
            let k = assemble_v_gram(&mesh).to_dense();
            assert!((m - reference_global(&mesh, true, &ones)).amax() < 1e-14);
            assert!((k - reference_global(&mesh, false, &ones)).amax() < 1e-12);
        }
        let mesh = build_mesh(2).unwrap();
        assert!((assemble_mass(&mesh).diag[0] - 2.0 * 0.5 / 3.0).abs() < 1e-15);
        assert_eq!(assemble_v_gram(&mesh).diag, vec![4.0]);
    }

    #[test]
    fn mass_row_sums_bounded_by_h() {
        let mesh = build_mesh(8).unwrap();
        let m = assemble_mass(&mesh).to_dense();
        for i in 0..mesh.n_dof() {
            assert!(m.row(i).sum() <= mesh.h + 1e-15);
        }
        assert!((m.clone() - m.transpose()).amax() == 0.0);
    }

    #[test]
    fn gram_matrices_are_positive_definite() {
        let mesh = build_mesh(50).unwrap();
        assert!(assemble_mass(&mesh).cholesky().is_ok());
        assert!(assemble_v_gram(&mesh).cholesky().is_ok());
        let eig = assemble_v_gram(&mesh).to_dense().symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
    }

    #[test]
    fn weighted_stiffness_cases() {
        let mesh = build_mesh(4).unwrap();
        let ones = vec![1.0; 4];
        assert_eq!(weighted_stiffness(&mesh, &ones).unwrap(), assemble_v_gram(&mesh));
        let c = weighted_stiffness(&mesh, &[2.5; 4]).unwrap();
        let expect = assemble_v_gram(&mesh).scaled(2.5);
        assert!(max_abs(&c.add_scaled(-1.0, &expect).diag) < 1e-13);
        // indicator of element 1 couples dofs 0 and 1 only
        let ind = weighted_stiffness(&mesh, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let d = ind.to_dense();
        let expect = reference_global(&mesh, false, &[0.0, 1.0, 0.0, 0.0]);
        assert!((d.clone() - expect).amax() < 1e-14);
        assert_eq!(d[(0, 0)], 4.0);
        assert_eq!(d[(0, 1)], -4.0);
        assert_eq!(d[(1, 1)], 4.0);
        assert_eq!(d[(2, 2)], 0.0);
        assert!(weighted_stiffness(&mesh, &[1.0; 3]).is_err());
    }

    #[test]
    fn weighted_apply_matches_matrix() {
        let mesh = build_mesh(9).unwrap();
        let w: Vec<f64> = (0..9).map(|e| 1.0 + e as f64 * 0.3).collect();
        let u: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).cos()).collect();
        let a = weighted_stiffness(&mesh, &w).unwrap();
        let mut out = vec![0.0; 8];
        weighted_stiffness_apply(&mesh, &w, &u, &mut out);
        let expect = a.mul_vec(&u);
        for i in 0..8 {
            assert!((out[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients() {
        let mesh = build_mesh(2).unwrap();
        assert_eq!(elem_gradient(&mesh, &[1.0]), vec![2.0, -2.0]);
        let mesh = build_mesh(10).unwrap();
        assert!(elem_gradient(&mesh, &[0.0; 9]).iter().all(|g| *g == 0.0));
        // x(1 - x): element slopes equal the finite differences of the nodal values
        let u: Vec<f64> = mesh.nodes.iter().map(|x| x * (1.0 - x)).collect();
        let g = elem_gradient(&mesh, &u);
        assert!(g.windows(2).all(|p| p[1] < p[0]));
        for e in 0..10 {
            let x = mesh.elem_midpoints[e];
            assert!((g[e] - (1.0 - 2.0 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_piecewise_linear_tent_is_exact() {
        let mesh = build_mesh(8).unwrap();
        let tent = |x: f64| if x < 0.5 { x } else { 1.0 - x };
        let u: Vec<f64> = mesh.nodes.iter().map(|&x| tent(x)).collect();
        let g = elem_gradient(&mesh, &u);
        for e in 0..8 {
            let expect = if e < 4 { 1.0 } else { -1.0 };
            assert!((g[e] - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_cases() {
        let mesh = build_mesh(20).unwrap();
        assert!(h_project(&mesh, |_| 0.0).unwrap().iter().all(|v| *v == 0.0));
        let u: Vec<f64> = mesh.nodes.iter().map(|x| (3.0 * x).sin() * x).collect();
        let p = h_project(&mesh, |x| eval_p1(&mesh, &u, x)).unwrap();
        for i in 0..u.len() {
            assert!((p[i] - u[i]).abs() < 1e-12);
        }
        let pp = h_project(&mesh, |x| eval_p1(&mesh, &p, x)).unwrap();
        assert!(p.iter().zip(&pp).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn projection_of_sine_is_second_order() {
        let mut errs = Vec::new();
        for n_elem in [25, 50, 100] {
            let mesh = build_mesh(n_elem).unwrap();
            let p = h_project(&mesh, |x| (2.0 * PI * x).sin()).unwrap();
            let err = mesh
                .nodes
                .iter()
                .zip(&p)
                .map(|(x, v)| (v - (2.0 * PI * x).sin()).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[2] < 5e-3);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5);
    }

    #[test]
    fn load_vector_of_constant() {
        let mesh = build_mesh(5).unwrap();
        let b = load_vector(&mesh, |_| 1.0);
        assert!(b.iter().all(|v| (v - mesh.h).abs() < 1e-15));
    }
}
