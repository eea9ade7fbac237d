//! Dense complex matrices for the small systems handled by this crate.
//!
//! Storage is row-major. Inversion is a partial-pivot LU written here; the
//! eigen-solvers and the matrix exponential delegate to `nalgebra`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense `rows × cols` complex matrix stored in row-major order.
#[derive(Clone, PartialEq, Serialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from row-major entries; fails unless `rows * cols == data.len()`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: n_rows,
            cols: n_cols,
            data,
        }
    }

    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let complex: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&complex)
    }

    /// Builds an `n × columns.len()` matrix whose columns are the given vectors.
    pub fn from_columns(n: usize, columns: &[Vec<C64>]) -> Self {
        let mut m = Self::zeros(n, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), n);
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    /// Pauli σₓ scaled by ½, the default two-mode perturbation coupling.
    pub fn half_sigma_x() -> Self {
        Self::from_real_rows(&[[0.0, 0.5], [0.5, 0.0]])
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Largest `|Mᵢⱼ − conj(Mⱼᵢ)|`; infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Matrix–vector product.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "shape {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    /// Largest absolute entry of `self − rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        Ok(self.try_sub(rhs)?.max_abs())
    }

    /// Gram matrix `M M†`.
    pub fn gram(&self) -> Self {
        self * &self.adjoint()
    }

    /// Inverse via LU decomposition with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "cannot invert a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let scale = self.max_abs();
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::Singular);
        }
        let mut lu = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|r| (r, lu[r * n + k].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmag <= f64::EPSILON * scale * 1e-2 {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let f = lu[r * n + k] / pivot;
                lu[r * n + k] = f;
                for j in (k + 1)..n {
                    let u = lu[k * n + j];
                    lu[r * n + j] -= f * u;
                }
            }
        }
        // Solve LU X = P I column by column.
        let mut inv = Self::zeros(n, n);
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = if perm[i] == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            }
            for i in 0..n {
                let mut s = col[i];
                for k in 0..i {
                    s -= lu[i * n + k] * col[k];
                }
                col[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = col[i];
                for k in (i + 1)..n {
                    s -= lu[i * n + k] * col[k];
                }
                col[i] = s / lu[i * n + i];
            }
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// Inverse of a 2×2 matrix from the cofactor formula, independent of the LU path.
    pub fn inverse_2x2_cofactor(&self) -> Result<Self> {
        if self.rows != 2 || self.cols != 2 {
            return Err(Error::DimensionMismatch("cofactor inverse needs 2x2".into()));
        }
        let (a, b, c, d) = (self[(0, 0)], self[(0, 1)], self[(1, 0)], self[(1, 1)]);
        let det = a * d - b * c;
        if det.norm() <= f64::EPSILON * self.max_abs().powi(2) * 1e-2 {
            return Err(Error::Singular);
        }
        Ok(Self::from_rows(&[[d / det, -b / det], [-c / det, a / det]]))
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }

    /// Eigenvalues of a general square matrix via the complex Schur form.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("eigenvalues need a square matrix".into()));
        }
        let schur = nalgebra::Schur::try_new(self.to_nalgebra(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::NumericFailure {
                matrix: Box::new(self.clone()),
            })?;
        let (_, t) = schur.unpack();
        Ok((0..self.rows).map(|i| t[(i, i)]).collect())
    }

    /// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and
    /// the matching orthonormal eigenvectors as columns.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        let dev = self.hermitian_deviation();
        let tol = 1e-10 * (1.0 + self.max_abs());
        if dev > tol {
            return Err(Error::NotHermitian(dev));
        }
        let n = self.rows;
        if n == 0 {
            return Ok((Vec::new(), Self::zeros(0, 0)));
        }
        // Symmetrize so rounding noise cannot leak into the solver.
        let herm = self.try_add(&self.adjoint())?.scale_re(0.5);
        let eig = nalgebra::SymmetricEigen::try_new(herm.to_nalgebra(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::NumericFailure {
                matrix: Box::new(self.clone()),
            })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vecs = Self::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            for i in 0..n {
                vecs[(i, dst)] = eig.eigenvectors[(i, src)];
            }
        }
        Ok((values, vecs))
    }

    /// Matrix exponential.
    pub fn expm(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("expm needs a square matrix".into()));
        }
        Ok(Self::from_nalgebra(&self.to_nalgebra().exp()))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.try_mul(rhs).expect("matrix product shape mismatch")
    }
}

impl Mul<&ComplexMatrix> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        &self * rhs
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for x in self.row(i) {
                write!(f, "{:+.6e}{:+.6e}i  ", x.re, x.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, "  ")?;
                }
                write!(f, "{:>12.6} {:>+12.6}i", x.re, x.im)?;
            }
            if i + 1 < self.rows {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_inverse_matches_cofactor_for_2x2() {
        let m = ComplexMatrix::from_rows(&[[c(0.3, -1.0), c(2.0, 0.5)], [c(-0.7, 0.1), c(1.5, 2.0)]]);
        let a = m.inverse().unwrap();
        let b = m.inverse_2x2_cofactor().unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-14);
        let id = &m * &a;
        assert!(id.max_abs_diff(&ComplexMatrix::identity(2)).unwrap() < 1e-14);
    }

    #[test]
    fn lu_inverse_needs_pivoting() {
        let m = ComplexMatrix::from_real_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0]]);
        let inv = m.inverse().unwrap();
        assert!((&m * &inv).max_abs_diff(&ComplexMatrix::identity(3)).unwrap() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = ComplexMatrix::from_real_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(m.inverse(), Err(Error::Singular)));
        assert!(matches!(m.inverse_2x2_cofactor(), Err(Error::Singular)));
        assert!(matches!(ComplexMatrix::zeros(3, 3).inverse(), Err(Error::Singular)));
    }

    #[test]
    fn row_major_length_is_checked() {
        assert!(ComplexMatrix::from_row_major(2, 2, vec![C64::new(1.0, 0.0); 3]).is_err());
        let m = ComplexMatrix::from_row_major(1, 3, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]).unwrap();
        assert_eq!(m[(0, 2)], c(3.0, 0.0));
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let m = ComplexMatrix::from_rows(&[[c(2.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(-1.0, 0.0)]]);
        let (vals, vecs) = m.hermitian_eigen().unwrap();
        assert!(vals[0] < vals[1]);
        let d = ComplexMatrix::from_diag(&vals.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>());
        let back = &(&vecs * &d) * &vecs.adjoint();
        assert!(back.max_abs_diff(&m).unwrap() < 1e-13);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let m = ComplexMatrix::from_real_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(m.hermitian_eigen(), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eigenvalues_of_triangular_matrix() {
        let m = ComplexMatrix::from_rows(&[[c(-1.0, 2.0), c(5.0, 0.0)], [c(0.0, 0.0), c(-0.5, 0.0)]]);
        let mut ev = m.eigenvalues().unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c(-1.0, 2.0)).norm() < 1e-12);
        assert!((ev[1] - c(-0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn expm_of_diagonal() {
        let m = ComplexMatrix::from_diag(&[c(-1.0, 0.5), c(0.0, -2.0)]);
        let e = m.expm().unwrap();
        assert!((e[(0, 0)] - c(-1.0, 0.5).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - c(0.0, -2.0).exp()).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15);
    }
}
