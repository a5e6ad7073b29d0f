//! Small dense matrices with the handful of operations the localization code needs:
//! products, LU factorization (determinant and solve) and power iteration.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally sized rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[S]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.data.iter()
    }

    pub fn mul(&self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == S::zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "inner dimensions differ");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: S) -> Matrix<S> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    /// Largest absolute entry, i.e. the entrywise max-norm.
    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    pub fn determinant(&self) -> S {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        match Lu::factor(self.clone()) {
            Some(lu) => lu.determinant(),
            None => S::zero(),
        }
    }

    /// Solves `self * X = rhs`. Returns `None` when the matrix is numerically singular.
    pub fn solve(&self, rhs: &Matrix<S>) -> Option<Matrix<S>> {
        assert_eq!(self.rows, self.cols, "solve with non-square matrix");
        assert_eq!(self.rows, rhs.rows, "right-hand side has wrong row count");
        Lu::factor(self.clone()).map(|lu| lu.solve(rhs))
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;

    fn index(&self, (r, c): (usize, usize)) -> &S {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// LU factorization with partial pivoting, packed in place.
struct Lu<S> {
    lu: Matrix<S>,
    perm: Vec<usize>,
    sign: S,
}

impl<S: Scalar> Lu<S> {
    fn factor(mut a: Matrix<S>) -> Option<Self> {
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = S::one();
        for k in 0..n {
            let (pivot_row, pivot) = (k..n)
                .map(|r| (r, a[(r, k)].abs()))
                .fold((k, S::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == S::zero() || !pivot.is_finite() {
                return None;
            }
            if pivot_row != k {
                for c in 0..n {
                    a.data.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
                sign = -sign;
            }
            let diag = a[(k, k)];
            for r in k + 1..n {
                let f = a[(r, k)] / diag;
                a[(r, k)] = f;
                if f != S::zero() {
                    for c in k + 1..n {
                        let v = a[(k, c)];
                        a[(r, c)] -= f * v;
                    }
                }
            }
        }
        Some(Self { lu: a, perm, sign })
    }

    fn determinant(&self) -> S {
        (0..self.lu.rows).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    fn solve(&self, rhs: &Matrix<S>) -> Matrix<S> {
        let n = self.lu.rows;
        let mut x = Matrix::from_fn(n, rhs.cols, |r, c| rhs[(self.perm[r], c)]);
        for c in 0..rhs.cols {
            for r in 0..n {
                let mut acc = x[(r, c)];
                for k in 0..r {
                    acc -= self.lu[(r, k)] * x[(k, c)];
                }
                x[(r, c)] = acc;
            }
            for r in (0..n).rev() {
                let mut acc = x[(r, c)];
                for k in r + 1..n {
                    acc -= self.lu[(r, k)] * x[(k, c)];
                }
                x[(r, c)] = acc / self.lu[(r, r)];
            }
        }
        x
    }
}

/// Power-iteration estimate of the spectral radius of a nonnegative square matrix.
///
/// Iterates on `I + P`, whose Perron root is `1 + rho(P)` and which is never periodic,
/// starting from the all-ones vector. Stops after `max_iter` steps or once the
/// normalized iterate moves by less than `rel_tol`. The eigenvalue ratio alone can stall
/// for a step or two (e.g. at the largest row sum), so it is not used as the stopping
/// rule. This is an estimate, not a certificate.
pub fn spectral_radius_nonneg<S: Scalar>(p: &Matrix<S>, max_iter: usize, rel_tol: S) -> S {
    assert_eq!(p.rows(), p.cols(), "spectral radius of non-square matrix");
    let n = p.rows();
    if n == 0 {
        return S::zero();
    }
    let mut v = vec![S::one(); n];
    let mut estimate = S::zero();
    for _ in 0..max_iter {
        let pv = p.mul_vec(&v);
        let w: Vec<S> = v.iter().zip(&pv).map(|(&a, &b)| a + b).collect();
        let norm = w.iter().fold(S::zero(), |m, &a| m.max(a.abs()));
        if norm == S::zero() {
            return S::zero();
        }
        // v is normalized to unit max-norm, so norm / |v| = norm.
        estimate = norm - S::one();
        let w: Vec<S> = w.into_iter().map(|a| a / norm).collect();
        let moved = v
            .iter()
            .zip(&w)
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        v = w;
        if moved <= rel_tol {
            break;
        }
    }
    estimate.max(S::zero())
}
