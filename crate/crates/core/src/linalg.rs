//! Dense row-major matrices and LU factorization with partial pivoting.
//!
//! Every factorization is recorded in a per-thread log so callers can check
//! which system sizes a code path actually inverted.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pivots with magnitude below this are treated as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize, ctx: T::Ctx) -> Self {
        Matrix { rows, cols, data: vec![T::zero(ctx); rows * cols] }
    }

    pub fn identity(n: usize, ctx: T::Ctx) -> Self {
        let mut m = Self::zeros(n, n, ctx);
        for i in 0..n {
            m.data[i * n + i] = T::one(ctx);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has the wrong length");
        Matrix { rows, cols, data }
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
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    /// Submatrix picking the given rows and columns, in order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }

    pub fn matmul(&self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matmul");
        let ctx = self.ctx_or(rhs);
        let mut out: Matrix<T> = Matrix::zeros(self.rows, rhs.cols, ctx);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let (orow, rrow) = (i * rhs.cols, k * rhs.cols);
                for j in 0..rhs.cols {
                    let b = &rhs.data[rrow + j];
                    out.data[orow + j].mul_add_assign(a, b);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut acc = T::zero(row.first().map(|x| x.ctx()).unwrap_or_else(T::default_ctx));
                for (a, b) in row.iter().zip(v) {
                    acc.mul_add_assign(a, b);
                }
                acc
            })
            .collect()
    }

    /// Largest absolute entrywise difference, in double precision.
    pub fn max_abs_diff(&self, rhs: &Matrix<T>) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a.sub(b).abs().to_f64())
            .fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(Scalar::to_f64).collect() }
    }

    fn ctx_or(&self, other: &Matrix<T>) -> T::Ctx {
        self.data.first().or_else(|| other.data.first()).map(|x| x.ctx()).unwrap_or_else(T::default_ctx)
    }
}

impl Matrix<f64> {
    pub fn from_f64<T: Scalar>(&self, ctx: T::Ctx) -> Matrix<T> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| T::from_f64(x, ctx)).collect() }
    }
}

/// LU factorization `P A = L U` with unit-diagonal `L`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        instrument::record(n);
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        if n == 0 {
            return Ok(Lu { n, lu, perm });
        }
        let ctx = lu[0].ctx();
        let tol = T::from_f64(PIVOT_TOLERANCE, ctx);
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < tol {
                return Err(Error::Singular { step: k, pivot: best.to_f64() });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k].clone();
            for i in k + 1..n {
                let l = lu[i * n + k].div(&pivot);
                if !l.is_zero() {
                    let (upper, lower) = lu.split_at_mut(i * n);
                    let krow = &upper[k * n..k * n + n];
                    let irow = &mut lower[..n];
                    for j in k + 1..n {
                        irow[j].mul_sub_assign(&l, &krow[j]);
                    }
                }
                lu[i * n + k] = l;
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let (head, tail) = x.split_at_mut(i);
                tail[0].mul_sub_assign(&self.lu[i * n + j], &head[j]);
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let (head, tail) = x.split_at_mut(j);
                head[i].mul_sub_assign(&self.lu[i * n + j], &tail[0]);
            }
            x[i] = x[i].div(&self.lu[i * n + i]);
        }
        x
    }

    /// Solves `A X = B` for a block of right-hand sides.
    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        let n = self.n;
        assert_eq!(b.rows, n);
        let m = b.cols;
        let mut x: Vec<T> = Vec::with_capacity(n * m);
        for &p in &self.perm {
            x.extend_from_slice(b.row(p));
        }
        for i in 0..n {
            let (head, tail) = x.split_at_mut(i * m);
            let xi = &mut tail[..m];
            for j in 0..i {
                let l = &self.lu[i * n + j];
                if l.is_zero() {
                    continue;
                }
                let xj = &head[j * m..j * m + m];
                for c in 0..m {
                    xi[c].mul_sub_assign(l, &xj[c]);
                }
            }
        }
        for i in (0..n).rev() {
            let (head, tail) = x.split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            for j in i + 1..n {
                let u = &self.lu[i * n + j];
                if u.is_zero() {
                    continue;
                }
                let xj = &tail[(j - i - 1) * m..(j - i) * m];
                for c in 0..m {
                    xi[c].mul_sub_assign(u, &xj[c]);
                }
            }
            let d = &self.lu[i * n + i];
            for v in xi.iter_mut() {
                *v = v.div(d);
            }
        }
        Matrix { rows: n, cols: m, data: x }
    }

    pub fn inverse(&self) -> Matrix<T> {
        let ctx = match self.lu.first() {
            Some(x) => x.ctx(),
            None => return Matrix { rows: 0, cols: 0, data: Vec::new() },
        };
        self.solve(&Matrix::identity(self.n, ctx))
    }
}

/// Per-thread log of factorization sizes.
pub mod instrument {
    use super::*;

    thread_local! {
        static FACTORED: RefCell<Vec<usize>> = const { RefCell::new(Vec::new()) };
    }

    pub(super) fn record(n: usize) {
        FACTORED.with(|f| f.borrow_mut().push(n));
    }

    pub fn reset() {
        FACTORED.with(|f| f.borrow_mut().clear());
    }

    /// Dimensions of every factorization performed on this thread since the
    /// last [`reset`].
    pub fn factorizations() -> Vec<usize> {
        FACTORED.with(|f| f.borrow().clone())
    }
}
