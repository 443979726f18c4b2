//! Small linear-algebra kernels: symmetric tridiagonal matrices with a banded
//! Cholesky factorization, and an in-place dense LU solve for the reduced systems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        SymTridiag {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x' A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = self.diag[i] * y[i];
            if i > 0 {
                row += self.off[i - 1] * y[i - 1];
            }
            if i + 1 < n {
                row += self.off[i] * y[i + 1];
            }
            acc += x[i] * row;
        }
        acc
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a + alpha * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().map(|a| alpha * a).collect(),
            off: self.off.iter().map(|a| alpha * a).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    pub fn cholesky(&self) -> Result<TridiagCholesky> {
        TridiagCholesky::factor(self)
    }

    /// Factor-and-solve for one right-hand side, without keeping the factor.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        let n = self.dim();
        check_len(n, rhs.len())?;
        if n == 0 {
            return Ok(());
        }
        // LDL' sweep fused with the forward substitution.
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        d.push(self.diag[0]);
        if !(d[0] > 0.0) {
            return Err(Error::SingularMatrix { row: 0, pivot: d[0] });
        }
        for i in 1..n {
            let li = self.off[i - 1] / d[i - 1];
            let di = self.diag[i] - li * self.off[i - 1];
            if !(di > 0.0) {
                return Err(Error::SingularMatrix { row: i, pivot: di });
            }
            l.push(li);
            d.push(di);
            rhs[i] -= li * rhs[i - 1];
        }
        rhs[n - 1] /= d[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] / d[i] - l[i] * rhs[i + 1];
        }
        Ok(())
    }
}

/// `A = L D L'` factor of an SPD tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagCholesky {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagCholesky {
    pub fn factor(a: &SymTridiag) -> Result<Self> {
        let n = a.dim();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let di = if i == 0 {
                a.diag[0]
            } else {
                let li = a.off[i - 1] / d[i - 1];
                l.push(li);
                a.diag[i] - li * a.off[i - 1]
            };
            if !(di > 0.0) {
                return Err(Error::SingularMatrix { row: i, pivot: di });
            }
            d.push(di);
        }
        Ok(TridiagCholesky { d, l })
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.d.len();
        if n == 0 {
            return;
        }
        for i in 1..n {
            rhs[i] -= self.l[i - 1] * rhs[i - 1];
        }
        rhs[n - 1] /= self.d[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] / self.d[i] - self.l[i] * rhs[i + 1];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solves the dense `n x n` system stored row-major in `a` by Gaussian elimination
/// with partial pivoting. `a` is overwritten; the solution replaces `b`.
pub fn dense_solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if !(best > 0.0 && best.is_finite()) {
            return Err(Error::SingularMatrix {
                row: col,
                pivot: best,
            });
        }
        if piv != col {
            let (top, bottom) = a.split_at_mut(piv * n);
            top[col * n..(col + 1) * n].swap_with_slice(&mut bottom[..n]);
            b.swap(col, piv);
        }
        let (top, bottom) = a.split_at_mut((col + 1) * n);
        let prow = &top[col * n + col..(col + 1) * n];
        let inv = 1.0 / prow[0];
        let bc = b[col];
        for (r, row) in bottom.chunks_exact_mut(n).enumerate() {
            let f = row[col] * inv;
            if f != 0.0 {
                for (x, p) in row[col + 1..].iter_mut().zip(&prow[1..]) {
                    *x -= f * p;
                }
                b[col + 1 + r] -= f * bc;
            }
        }
    }
    for row in (0..n).rev() {
        let r = &a[row * n..(row + 1) * n];
        let acc = b[row] - r[row + 1..].iter().zip(&b[row + 1..]).map(|(x, y)| x * y).sum::<f64>();
        b[row] = acc / r[row];
    }
    Ok(())
}

/// Forward substitution `L x = b` for a lower-triangular row-major `L`.
pub fn forward_substitute(lower: &[f64], b: &[f64], x: &mut [f64], n: usize) {
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= lower[i * n + j] * x[j];
        }
        x[i] = acc / lower[i * n + i];
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product with four independent partial sums, which lets the compiler keep
/// several multiply-adds in flight. Summation order differs from [`dot`].
#[inline]
pub fn dot_unrolled(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
