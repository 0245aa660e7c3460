//! Minimal dense complex linear algebra.
//!
//! Everything the optimizers need fits in one row-major matrix type over
//! `Complex64`: products, Hermitian transpose, a Cholesky-based solver for
//! Hermitian positive definite systems, and Frobenius norms. Problem sizes are
//! small (the largest systems solved here are `ris_elements`-independent, K² or
//! M-sized), so straightforward loops beat pulling in a BLAS binding.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data; errors when the length does not
    /// match `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_vec",
                detail: format!("{} entries for a {rows}x{cols} matrix", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Column vector (n x 1) from a slice.
    pub fn column_vector(entries: &[Complex64]) -> Self {
        Self {
            rows: entries.len(),
            cols: 1,
            data: entries.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Raw row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                detail: format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, rhs.rows, rhs.cols
                ),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        // i-k-j order keeps both operands streaming row-major.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.at(c, r).conj())
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Self,
        op: &'static str,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                op,
                detail: format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self + mu * I`; errors on non-square input.
    pub fn shifted(&self, mu: f64) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                op: "shifted",
                detail: format!("{}x{} is not square", self.rows, self.cols),
            });
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            out.data[i * self.cols + i] += Complex64::new(mu, 0.0);
        }
        Ok(out)
    }

    /// Copy of column `j` as an n x 1 vector.
    pub fn column(&self, j: usize) -> Self {
        Self::from_fn(self.rows, 1, |r, _| self.at(r, j))
    }

    pub fn set_column(&mut self, j: usize, col: &Self) {
        debug_assert_eq!(col.rows, self.rows);
        debug_assert_eq!(col.cols, 1);
        for r in 0..self.rows {
            self.set(r, j, col.at(r, 0));
        }
    }

    /// Hermitian inner product `self^H . other` over flattened entries.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                op: "inner",
                detail: format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.conj() * b)
            .sum())
    }

    /// Solves `self * X = rhs` for Hermitian positive definite `self` via a
    /// Cholesky factorization (`A = L L^H`). Only the lower triangle of `self`
    /// is read. A non-positive (or non-finite) pivot reports
    /// [`Error::NotPositiveDefinite`].
    pub fn solve_hermitian_positive(&self, rhs: &Self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                op: "solve_hermitian_positive",
                detail: format!("{}x{} is not square", self.rows, self.cols),
            });
        }
        if rhs.rows != self.rows {
            return Err(Error::DimensionMismatch {
                op: "solve_hermitian_positive",
                detail: format!("rhs has {} rows, expected {}", rhs.rows, self.rows),
            });
        }
        let l = self.cholesky_lower()?;
        let n = self.rows;
        let mut x = rhs.clone();
        // Forward substitution: L y = rhs.
        for i in 0..n {
            let lii = l[i * n + i];
            for col in 0..x.cols {
                let mut s = x.data[i * x.cols + col];
                for k in 0..i {
                    s -= l[i * n + k] * x.data[k * x.cols + col];
                }
                x.data[i * x.cols + col] = s / lii;
            }
        }
        // Back substitution: L^H x = y.
        for i in (0..n).rev() {
            let lii = l[i * n + i];
            for col in 0..x.cols {
                let mut s = x.data[i * x.cols + col];
                for k in (i + 1)..n {
                    s -= l[k * n + i].conj() * x.data[k * x.cols + col];
                }
                x.data[i * x.cols + col] = s / lii;
            }
        }
        Ok(x)
    }

    /// Lower Cholesky factor as row-major data.
    fn cholesky_lower(&self) -> Result<Vec<Complex64>> {
        let n = self.rows;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = self.data[j * n + j].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: d, index: j });
            }
            let dj = d.sqrt();
            l[j * n + j] = Complex64::new(dj, 0.0);
            for i in (j + 1)..n {
                let mut s = self.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / dj;
            }
        }
        Ok(l)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}
