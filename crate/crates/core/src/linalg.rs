//! Dense linear algebra for small matrices.
//!
//! Everything here works on column-ordered `n x n` matrices and plain `f64`
//! slices. The routines mirror the handful of BLAS/LAPACK kernels the solver
//! needs: `axpy`, `dot`, `nrm2`, `scal`, `copy`, `gemv`, a diagonal shift and a
//! shifted complete Cholesky factorization with triangular solves.
//!
//! Matrices are expected to be small (a few dozen rows), so all algorithms are
//! unblocked.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Errors raised by the dense kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("factorization failed: diagonal shift {shift:e} exceeds cap {cap:e}")]
    FactorizationFailed { shift: f64, cap: f64 },
    #[error("singular triangular factor: zero diagonal entry at index {index}")]
    SingularFactor { index: usize },
}

/// Selects `A` or `A^T` in [`gemv`] and [`trtrs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

/// Square dense matrix stored column by column.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Zero matrix of dimension `n`.
    ///
    /// Panics if `n == 0`.
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be positive");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from `f(row, col)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in 0..n {
                m.data[j * n + i] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from a row-major listing, which is how matrices are
    /// usually written down by hand.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let n = rows.len();
        if n == 0 {
            return Err(LinalgError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// Wraps column-ordered data of length `n * n`.
    pub fn from_col_major(n: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if n == 0 || data.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Column-ordered entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Column `j` as a slice.
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute diagonal entry.
    pub fn max_abs_diag(&self) -> f64 {
        (0..self.n).fold(0.0, |m, i| m.max(self[(i, i)].abs()))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn principal_submatrix(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), |i, j| self[(indices[i], indices[j])])
    }

    /// Adds `alpha` to every diagonal entry in place.
    pub fn shift_diagonal(&mut self, alpha: f64) {
        for i in 0..self.n {
            self[(i, i)] += alpha;
        }
    }

    /// Dense product `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        check_len(self.n, other.n)?;
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for j in 0..n {
            for k in 0..n {
                let b = other[(k, j)];
                if b == 0.0 {
                    continue;
                }
                for i in 0..n {
                    out.data[j * n + i] += self.data[k * n + i] * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f64, LinalgError> {
        check_len(self.n, other.n)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.n + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.n + i]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix({}x{})", self.n, self.n)?;
        for i in 0..self.n {
            let row: Vec<f64> = (0..self.n).map(|j| self[(i, j)]).collect();
            writeln!(f, "  {row:?}")?;
        }
        Ok(())
    }
}

#[inline]
fn check_len(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, found })
    }
}

/// `y <- y + alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) -> Result<(), LinalgError> {
    check_len(y.len(), x.len())?;
    if alpha != 0.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }
    Ok(())
}

pub fn dot(x: &[f64], y: &[f64]) -> Result<f64, LinalgError> {
    check_len(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum())
}

/// Euclidean norm.
pub fn nrm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `x <- alpha * x`.
pub fn scal(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// `y <- x`.
pub fn copy(x: &[f64], y: &mut [f64]) -> Result<(), LinalgError> {
    check_len(y.len(), x.len())?;
    y.copy_from_slice(x);
    Ok(())
}

/// `y <- alpha * op(A) * x + beta * y`.
///
/// As in BLAS, `y` is not read when `beta == 0`.
pub fn gemv(
    alpha: f64,
    a: &DenseMatrix,
    x: &[f64],
    beta: f64,
    y: &mut [f64],
    trans: Trans,
) -> Result<(), LinalgError> {
    let n = a.n();
    check_len(n, x.len())?;
    check_len(n, y.len())?;
    if beta == 0.0 {
        y.iter_mut().for_each(|v| *v = 0.0);
    } else if beta != 1.0 {
        scal(beta, y);
    }
    if alpha == 0.0 {
        return Ok(());
    }
    match trans {
        Trans::No => {
            for (j, &xj) in x.iter().enumerate() {
                let t = alpha * xj;
                if t != 0.0 {
                    for (yi, aij) in y.iter_mut().zip(a.col(j)) {
                        *yi += t * aij;
                    }
                }
            }
        }
        Trans::Yes => {
            for (j, yj) in y.iter_mut().enumerate() {
                let s: f64 = a.col(j).iter().zip(x).map(|(aij, xi)| aij * xi).sum();
                *yj += alpha * s;
            }
        }
    }
    Ok(())
}

/// Returns `A + alpha * I`.
pub fn ccfs(a: &DenseMatrix, alpha: f64) -> DenseMatrix {
    let mut out = a.clone();
    out.shift_diagonal(alpha);
    out
}

/// Lower-triangular factor `L` with `A + shift * I = L L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedCholesky {
    pub factor: DenseMatrix,
    pub shift: f64,
}

/// Shift escalation used by both factorization orderings.
///
/// Tries `alpha = 0` first; on a nonpositive pivot it restarts with
/// `alpha = max(2 * alpha, alpha0)`, `alpha0 = max(1e-3 * max|A_ii|, 1e-8)`,
/// giving up once `alpha` exceeds `1e8 * max(1, max|A_ij|)`.
fn factor_with_shift(
    a: &DenseMatrix,
    attempt: fn(&DenseMatrix, f64, &mut DenseMatrix) -> bool,
) -> Result<ShiftedCholesky, LinalgError> {
    let mut l = DenseMatrix::zeros(a.n());
    let alpha0 = (1e-3 * a.max_abs_diag()).max(1e-8);
    let cap = 1e8 * a.max_abs().max(1.0);
    let mut alpha = 0.0;
    loop {
        if attempt(a, alpha, &mut l) {
            return Ok(ShiftedCholesky {
                factor: l,
                shift: alpha,
            });
        }
        alpha = (2.0 * alpha).max(alpha0);
        // NaN entries make every attempt fail and end up here too.
        if !(alpha <= cap) || !cap.is_finite() {
            return Err(LinalgError::FactorizationFailed { shift: alpha, cap });
        }
    }
}

/// Left-looking attempt: column `j` receives all previous updates right
/// before it is factored.
fn left_looking_attempt(a: &DenseMatrix, alpha: f64, l: &mut DenseMatrix) -> bool {
    let n = a.n();
    l.fill(0.0);
    for j in 0..n {
        for i in j..n {
            let mut s = a[(i, j)];
            if i == j {
                s += alpha;
            }
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[(j, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    true
}

/// Right-looking attempt: after a column is factored its contribution is
/// subtracted from the trailing submatrix immediately.
fn right_looking_attempt(a: &DenseMatrix, alpha: f64, l: &mut DenseMatrix) -> bool {
    let n = a.n();
    l.fill(0.0);
    for j in 0..n {
        for i in j..n {
            l[(i, j)] = a[(i, j)];
        }
        l[(j, j)] += alpha;
    }
    for k in 0..n {
        let pivot = l[(k, k)];
        if !(pivot > 0.0) {
            return false;
        }
        let d = pivot.sqrt();
        l[(k, k)] = d;
        for i in k + 1..n {
            l[(i, k)] /= d;
        }
        for j in k + 1..n {
            let ljk = l[(j, k)];
            for i in j..n {
                let lik = l[(i, k)];
                l[(i, j)] -= lik * ljk;
            }
        }
    }
    true
}

/// Shifted complete Cholesky factorization, left-looking.
///
/// Only the lower triangle of `a` is read.
pub fn ccf(a: &DenseMatrix) -> Result<ShiftedCholesky, LinalgError> {
    factor_with_shift(a, left_looking_attempt)
}

/// Same contract as [`ccf`] with the right-looking update order.
pub fn ccf_right_looking(a: &DenseMatrix) -> Result<ShiftedCholesky, LinalgError> {
    factor_with_shift(a, right_looking_attempt)
}

/// Solves `L x = b` (forward) or `L^T x = b` (backward) in place, where `L`
/// is the lower triangle of `l`.
pub fn trtrs(l: &DenseMatrix, b: &mut [f64], trans: Trans) -> Result<(), LinalgError> {
    let n = l.n();
    check_len(n, b.len())?;
    if let Some(index) = (0..n).find(|&i| l[(i, i)] == 0.0) {
        return Err(LinalgError::SingularFactor { index });
    }
    match trans {
        Trans::No => {
            for j in 0..n {
                let xj = b[j] / l[(j, j)];
                b[j] = xj;
                if xj != 0.0 {
                    for i in j + 1..n {
                        b[i] -= l[(i, j)] * xj;
                    }
                }
            }
        }
        Trans::Yes => {
            for j in (0..n).rev() {
                let mut s = b[j];
                for i in j + 1..n {
                    s -= l[(i, j)] * b[i];
                }
                b[j] = s / l[(j, j)];
            }
        }
    }
    Ok(())
}
