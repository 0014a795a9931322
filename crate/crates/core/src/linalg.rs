//! Dense matrices and Cholesky factor-and-solve.
//!
//! No routine here ever forms an explicit inverse; every `A⁻¹ B` in the
//! model equations goes through [`Cholesky::solve`] or one of the
//! triangular half-solves.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative jitter added to the diagonal on the first retry.
pub const JITTER_BASE: f64 = 1e-10;
/// Number of jittered retries (the jitter doubles each time).
pub const JITTER_ATTEMPTS: usize = 6;
/// Symmetry tolerance relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "from_row_major",
                expected: (rows, cols),
                actual: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector.
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|A[i][j] - A[j][i]|`; zero for non-square input is not meaningful.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `self · rhs`
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch {
                context: "matmul",
                expected: (self.cols, rhs.cols),
                actual: rhs.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(out_row, a, rhs.row(k));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs`
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::ShapeMismatch {
                context: "t_matmul",
                expected: (self.rows, rhs.cols),
                actual: rhs.shape(),
            });
        }
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = rhs.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(&mut out.data[i * rhs.cols..(i + 1) * rhs.cols], a, b_row);
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ`
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::ShapeMismatch {
                context: "matmul_t",
                expected: (rhs.rows, self.cols),
                actual: rhs.shape(),
            });
        }
        Ok(Matrix::from_fn(self.rows, rhs.rows, |i, j| {
            dot(self.row(i), rhs.row(j))
        }))
    }

    /// `selfᵀ · self`, exactly symmetric.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut out = Matrix::zeros(n, n);
        for k in 0..self.rows {
            let r = self.row(k);
            for i in 0..n {
                let a = r[i];
                if a == 0.0 {
                    continue;
                }
                let row = &mut out.data[i * n..i * n + i + 1];
                axpy(row, a, &r[..=i]);
            }
        }
        for i in 0..n {
            for j in 0..i {
                out.data[j * n + i] = out.data[i * n + j];
            }
        }
        out
    }

    /// `self · self ᵀ`, exactly symmetric.
    pub fn outer_gram(&self) -> Matrix {
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                out.data[i * n + j] = v;
                out.data[j * n + i] = v;
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::ShapeMismatch {
                context: "mat_vec",
                expected: (self.cols, 1),
                actual: (v.len(), 1),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ · v`
    pub fn t_mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(Error::ShapeMismatch {
                context: "t_mat_vec",
                expected: (self.rows, 1),
                actual: (v.len(), 1),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (k, &a) in v.iter().enumerate() {
            if a != 0.0 {
                axpy(&mut out, a, self.row(k));
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, rhs: &Matrix) -> Result<()> {
        self.check_same(rhs, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, rhs: &Matrix) -> Result<()> {
        self.check_same(rhs, "sub_assign")?;
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    pub fn add_to_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += value;
        }
    }

    /// Copy of the columns in `start..end`.
    pub fn column_range(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_fn(self.rows, end - start, |i, j| self[(i, start + j)])
    }

    /// Concatenates blocks with equal row counts side by side.
    pub fn hconcat(blocks: &[Matrix]) -> Result<Matrix> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for b in blocks {
            if b.rows != rows {
                return Err(Error::ShapeMismatch {
                    context: "hconcat",
                    expected: (rows, b.cols),
                    actual: b.shape(),
                });
            }
            for i in 0..rows {
                out.row_mut(i)[offset..offset + b.cols].copy_from_slice(b.row(i));
            }
            offset += b.cols;
        }
        Ok(out)
    }

    fn check_same(&self, rhs: &Matrix, context: &'static str) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::ShapeMismatch {
                context,
                expected: self.shape(),
                actual: rhs.shape(),
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Row-wise dot products, i.e. the diagonal of `a · bᵀ`.
pub fn row_dots(a: &Matrix, b: &Matrix) -> Vec<f64> {
    debug_assert_eq!(a.shape(), b.shape());
    (0..a.rows()).map(|i| dot(a.row(i), b.row(i))).collect()
}

/// Column-wise dot products, i.e. the diagonal of `aᵀ · b`.
pub fn col_dots(a: &Matrix, b: &Matrix) -> Vec<f64> {
    debug_assert_eq!(a.shape(), b.shape());
    let mut out = vec![0.0; a.cols()];
    for k in 0..a.rows() {
        for ((o, x), y) in out.iter_mut().zip(a.row(k)).zip(b.row(k)) {
            *o += x * y;
        }
    }
    out
}

/// Lower-triangular Cholesky factor `L` with `A + jitter·I = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
    jitter: f64,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix.
    ///
    /// On failure the diagonal is bumped by `1e-10 · mean(diag)`, doubling
    /// for up to six attempts, before giving up.
    pub fn factor(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch {
                context: "cholesky",
                expected: (a.rows(), a.rows()),
                actual: a.shape(),
            });
        }
        let asym = a.max_asymmetry();
        if asym > SYMMETRY_TOL * a.max_abs() {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        if let Some(l) = factor_lower(a, 0.0) {
            return Ok(Self { l, jitter: 0.0 });
        }
        let n = a.rows();
        let mean_diag = if n == 0 { 0.0 } else { a.trace() / n as f64 };
        let mut jitter = JITTER_BASE * mean_diag.abs();
        if jitter == 0.0 {
            jitter = JITTER_BASE;
        }
        for _ in 0..JITTER_ATTEMPTS {
            if let Some(l) = factor_lower(a, jitter) {
                return Ok(Self { l, jitter });
            }
            jitter *= 2.0;
        }
        Err(Error::NotPositiveDefinite { jitter: jitter / 2.0 })
    }

    pub fn order(&self) -> usize {
        self.l.rows()
    }

    /// Diagonal jitter that was needed (zero when the plain factorization succeeded).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// `L⁻¹ B`
    pub fn solve_lower(&self, b: &Matrix) -> Result<Matrix> {
        self.check_rhs(b)?;
        let n = self.order();
        let mut x = b.clone();
        for i in 0..n {
            let (done, rest) = x.data.split_at_mut(i * b.cols);
            let row_i = &mut rest[..b.cols];
            let l_row = self.l.row(i);
            for (j, &lij) in l_row[..i].iter().enumerate() {
                if lij != 0.0 {
                    axpy(row_i, -lij, &done[j * b.cols..(j + 1) * b.cols]);
                }
            }
            let inv = l_row[i];
            for v in row_i.iter_mut() {
                *v /= inv;
            }
        }
        Ok(x)
    }

    /// `L⁻ᵀ B`
    pub fn solve_upper(&self, b: &Matrix) -> Result<Matrix> {
        self.check_rhs(b)?;
        let n = self.order();
        let cols = b.cols;
        let mut x = b.clone();
        for i in (0..n).rev() {
            let (head, tail) = x.data.split_at_mut((i + 1) * cols);
            let row_i = &mut head[i * cols..];
            for j in (i + 1)..n {
                let lji = self.l[(j, i)];
                if lji != 0.0 {
                    let off = (j - i - 1) * cols;
                    axpy(row_i, -lji, &tail[off..off + cols]);
                }
            }
            let d = self.l[(i, i)];
            for v in row_i.iter_mut() {
                *v /= d;
            }
        }
        Ok(x)
    }

    /// `A⁻¹ B`
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let y = self.solve_lower(b)?;
        self.solve_upper(&y)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(&Matrix::column(b))?.into_vec())
    }

    pub fn solve_lower_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_lower(&Matrix::column(b))?.into_vec())
    }

    fn check_rhs(&self, b: &Matrix) -> Result<()> {
        if b.rows() != self.order() {
            return Err(Error::ShapeMismatch {
                context: "cholesky solve",
                expected: (self.order(), b.cols()),
                actual: b.shape(),
            });
        }
        Ok(())
    }
}

fn factor_lower(a: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = a[(i, j)] + if i == j { jitter } else { 0.0 };
            let s = s - dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = libm::sqrt(s);
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves `A X = B` for symmetric positive-definite `A`.
pub fn pd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Cholesky::factor(a)?.solve(b)
}
