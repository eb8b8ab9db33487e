//! Dense row-major matrices over an arbitrary scalar.
//!
//! The same container backs the exact layer (`Mat<BigRational>`) and the
//! numeric layer (`Mat<f64>`); scalar requirements are expressed through
//! `num_traits` bounds so the arithmetic is written once.

use num::traits::{One, Zero};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Mat<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T> Mat<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    /// Entry-wise image under `f`, preserving shape.
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Mat<U> {
        Mat {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(&mut f).collect(),
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Option<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return None;
        }
        Some(Mat {
            nrows,
            ncols,
            data: rows.into_iter().flatten().collect(),
        })
    }
}

impl<T: Clone + Zero> Mat<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Mat::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    /// Relabels indices by `sigma`: the result has `self[i][j]` at
    /// `(sigma[i], sigma[j])`. With `R` the permutation matrix of `sigma`
    /// this is `R · self · R⁻¹`.
    pub fn pushforward(&self, sigma: &[usize]) -> Self {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(sigma.len(), self.nrows);
        let mut out = Mat::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out.set(sigma[i], sigma[j], self.get(i, j).clone());
            }
        }
        out
    }
}

impl<T: Clone + Zero + One + PartialEq> Mat<T> {
    pub fn identity(n: usize) -> Self {
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            out.set(i, i, T::one());
        }
        out
    }

    /// Matrix product; zero summands are skipped so exact big-rational
    /// products stay cheap on sparse supports.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows, "inner dimensions must agree");
        let mut out: Mat<T> = Mat::zeros(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.ncols {
                    let b = rhs.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.get(i, j).clone();
                    out.set(i, j, cur + a.clone() * b.clone());
                }
            }
        }
        out
    }

    /// `self^n` by repeated squaring; `n = 0` yields the identity.
    pub fn pow(&self, n: usize) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let mut result = Mat::identity(self.nrows);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }
}
