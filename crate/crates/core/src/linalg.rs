//! Small dense matrices.
//!
//! Dimensions here never exceed `3n ≤ 9`, so everything is a plain row-major
//! `Vec`. Elimination is written over [`Scalar`] so the same code inverts a
//! matrix of reals and a matrix of Taylor jets (pivoting on the value part).

use std::ops::{Index, IndexMut};

use num_traits::{Float, Zero};

use crate::scalar::{Real, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: Clone> Mat<S> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.iter().flatten().cloned().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&S) -> U) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Copy of the `r × c` block starting at `(i0, j0)`.
    pub fn block(&self, i0: usize, j0: usize, r: usize, c: usize) -> Self {
        Mat::from_fn(r, c, |i, j| self[(i0 + i, j0 + j)].clone())
    }

    pub fn set_block(&mut self, i0: usize, j0: usize, b: &Mat<S>) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(i0 + i, j0 + j)] = b[(i, j)].clone();
            }
        }
    }
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat::from_fn(rows, cols, |_, _| S::lit(0.0))
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| S::lit(if i == j { 1.0 } else { 0.0 }))
    }

    pub fn matmul(&self, rhs: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        Mat::from_fn(self.rows, rhs.cols, |i, j| {
            let mut acc = S::lit(0.0);
            for k in 0..self.cols {
                acc = acc + self[(i, k)].clone() * rhs[(k, j)].clone();
            }
            acc
        })
    }

    pub fn matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = S::lit(0.0);
                for (k, vk) in v.iter().enumerate() {
                    acc = acc + self[(i, k)].clone() * vk.clone();
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, rhs: &Mat<S>) -> Mat<S> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].clone() + rhs[(i, j)].clone())
    }

    pub fn sub(&self, rhs: &Mat<S>) -> Mat<S> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].clone() - rhs[(i, j)].clone())
    }

    pub fn scale(&self, k: S::Real) -> Mat<S> {
        self.map(|x| x.scale(k))
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrize(&self) -> Mat<S> {
        let half = <S::Real as Scalar>::lit(0.5);
        Mat::from_fn(self.rows, self.cols, |i, j| (self[(i, j)].clone() + self[(j, i)].clone()).scale(half))
    }

    /// Value parts.
    pub fn real(&self) -> Mat<S::Real> {
        self.map(|x| x.real())
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting on the value
    /// part; `None` if a pivot vanishes exactly.
    pub fn inverse(&self) -> Option<Mat<S>> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::<S>::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r1, &r2| {
                    let a1 = Float::abs(a[(r1, col)].real());
                    let a2 = Float::abs(a[(r2, col)].real());
                    a1.partial_cmp(&a2).unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty range");
            if a[(pivot, col)].real().is_zero() || !a[(pivot, col)].real().is_finite() {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let p = a[(col, col)].clone();
            for j in 0..n {
                a[(col, j)] = a[(col, j)].clone() / p.clone();
                inv[(col, j)] = inv[(col, j)].clone() / p.clone();
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[(r, col)].clone();
                if factor.is_constant() && factor.real().is_zero() {
                    continue;
                }
                for j in 0..n {
                    a[(r, j)] = a[(r, j)].clone() - factor.clone() * a[(col, j)].clone();
                    inv[(r, j)] = inv[(r, j)].clone() - factor.clone() * inv[(col, j)].clone();
                }
            }
        }
        Some(inv)
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[S]) -> Option<Vec<S>> {
        Some(self.inverse()?.matvec(b))
    }
}

impl<T: Real> Mat<T> {
    pub fn norm_inf(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(Float::abs(x)))
    }

    /// Largest absolute column sum.
    pub fn norm_1(&self) -> T {
        (0..self.cols).map(|j| (0..self.rows).map(|i| Float::abs(self[(i, j)])).sum::<T>()).fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, rhs: &Mat<T>) -> T {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        self.data.iter().zip(&rhs.data).fold(T::zero(), |m, (&a, &b)| m.max(Float::abs(a - b)))
    }

    /// Determinant by LU with partial pivoting.
    pub fn determinant(&self) -> T {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = T::one();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r1, &r2| {
                    Float::abs(a[(r1, col)]).partial_cmp(&Float::abs(a[(r2, col)])).unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty range");
            if a[(pivot, col)].is_zero() {
                return T::zero();
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                }
                det = -det;
            }
            let p = a[(col, col)];
            det *= p;
            for r in col + 1..n {
                let f = a[(r, col)] / p;
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] -= f * v;
                }
            }
        }
        det
    }

    /// Reciprocal condition number in the 1-norm, `1 / (‖A‖₁ ‖A⁻¹‖₁)`,
    /// together with the inverse. Zero when `A` is singular.
    pub fn rcond_with_inverse(&self) -> (T, Option<Mat<T>>) {
        match self.inverse() {
            Some(inv) if inv.data.iter().all(|x| x.is_finite()) => {
                let denom = self.norm_1() * inv.norm_1();
                let rc = if denom > T::zero() { T::one() / denom } else { T::zero() };
                (rc, Some(inv))
            }
            _ => (T::zero(), None),
        }
    }
}

/// Singular values (descending) of a real matrix.
pub fn singular_values<T>(m: &Mat<T>) -> Vec<T>
where
    T: Real + nalgebra::RealField,
{
    let dm = nalgebra::DMatrix::from_row_slice(m.rows, m.cols, &m.data);
    let mut sv: Vec<T> = dm.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Numerical rank: number of singular values above `threshold`.
pub fn rank<T>(m: &Mat<T>, threshold: T) -> usize
where
    T: Real + nalgebra::RealField,
{
    singular_values(m).into_iter().filter(|&s| s > threshold).count()
}
