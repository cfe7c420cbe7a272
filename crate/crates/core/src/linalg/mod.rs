//! Small dense real and complex matrices.
//!
//! Sizes in this crate are tiny (a handful of states, `d ≤ 4` coordinates),
//! so everything is row-major `Vec` storage with straightforward loops.

mod eigen;
mod expm;

pub use eigen::{eigenvalues, inverse_iteration, symmetric_eigenvalues};
pub use expm::expm;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Field operations shared by `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn scale(self, s: f64) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        libm::hypot(self.re, self.im)
    }
    fn scale(self, s: f64) -> Self {
        Complex64::new(self.re * s, self.im * s)
    }
}

#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RMat = Mat<f64>;
pub type CMat = Mat<Complex64>;

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_slice(rows: usize, cols: usize, values: &[T]) -> Self {
        assert_eq!(values.len(), rows * cols, "from_row_slice: wrong length");
        Self {
            rows,
            cols,
            data: values.to_vec(),
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row length",
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul: inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `M x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "mul_vec: dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `y M` for a row vector `y`.
    pub fn vec_mul(&self, y: &[T]) -> Vec<T> {
        assert_eq!(self.rows, y.len(), "vec_mul: dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += yi * a;
            }
        }
        out
    }

    /// Maximum absolute row sum, the operator norm induced by the sup norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    pub fn sub_mat(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn add_mat(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    /// `‖self − rhs‖` in the largest-entry sense.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        self.sub_mat(rhs).max_abs()
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::factorize(self)
    }
}

impl RMat {
    pub fn to_complex(&self) -> CMat {
        self.map(Complex64::from)
    }
}

impl CMat {
    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[r * self.cols..(r + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn factorize(a: &Mat<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.rows,
                cols: a.cols,
            });
        }
        let n = a.rows;
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].modulus()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= scale * 1e-14 {
                return Err(Error::SingularSystem { pivot: k });
            }
            if p != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == T::zero() {
                    continue;
                }
                for c in k + 1..n {
                    let u = lu[(k, c)];
                    lu[(i, c)] -= factor * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        assert_eq!(rhs.len(), n, "Lu::solve: dimension mismatch");
        let mut x: Vec<T> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= l * xk;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= u * xk;
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, rhs: &Mat<T>) -> Mat<T> {
        let mut out = Mat::zeros(rhs.rows, rhs.cols);
        let mut col = vec![T::zero(); rhs.rows];
        for c in 0..rhs.cols {
            for r in 0..rhs.rows {
                col[r] = rhs[(r, c)];
            }
            let x = self.solve(&col);
            for r in 0..rhs.rows {
                out[(r, c)] = x[r];
            }
        }
        out
    }
}

/// Lower-triangular `L` with `L Lᵀ = a` for a symmetric positive-definite `a`.
pub fn cholesky(a: &RMat) -> Result<RMat> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut l = RMat::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: diag,
            });
        }
        let ljj = libm::sqrt(diag);
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Determinant via LU; zero for singular input.
pub fn determinant(a: &RMat) -> f64 {
    let n = a.nrows();
    match Lu::factorize(a) {
        Ok(lu) => {
            let mut det = 1.0;
            for i in 0..n {
                det *= lu.lu[(i, i)];
            }
            let mut visited = vec![false; n];
            for start in 0..n {
                if visited[start] {
                    continue;
                }
                let mut len = 0;
                let mut j = start;
                while !visited[j] {
                    visited[j] = true;
                    j = lu.perm[j];
                    len += 1;
                }
                if len % 2 == 0 {
                    det = -det;
                }
            }
            det
        }
        Err(_) => 0.0,
    }
}

/// Bilinear pairing `Σ a_i b_i` without conjugation.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn sup_norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.modulus()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_reports_singular() {
        let a = RMat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let x = a.lu().unwrap().solve(&[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-14);
        }
        let s = RMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(s.lu(), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn determinant_tracks_permutation_sign() {
        let a = RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(determinant(&a), -1.0);
        let b = RMat::from_row_slice(3, 3, &[0.0, 0.0, 2.0, 0.0, 3.0, 0.0, 5.0, 0.0, 0.0]);
        assert!((determinant(&b) + 30.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = RMat::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let l = cholesky(&a).unwrap();
        assert!(l.matmul(&l.transpose()).max_abs_diff(&a) < 1e-14);
        let bad = RMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky(&bad), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn norms() {
        let a = RMat::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(a.norm_inf(), 3.5);
        assert_eq!(a.norm_1(), 4.0);
        assert_eq!(a.max_abs(), 3.0);
    }
}
