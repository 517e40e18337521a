//! Exact dense linear algebra over the cyclotomic coefficient field:
//! products, powers, Gauss-Jordan inverse, reduced row echelon form and
//! nullspace bases. Everything is fraction-exact; no pivot thresholds.

use crate::scalars::{CycScalar, ScalarError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is singular")]
    Singular,
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    conductor: u32,
    data: Vec<CycScalar>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize, conductor: u32) -> Self {
        Matrix {
            rows,
            cols,
            conductor,
            data: vec![CycScalar::zero(conductor); rows * cols],
        }
    }

    pub fn identity(n: usize, conductor: u32) -> Self {
        let mut m = Self::zero(n, n, conductor);
        for i in 0..n {
            m.set(i, i, CycScalar::one(conductor));
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<CycScalar>>, conductor: u32) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in &rows {
            if row.len() != ncols {
                return Err(LinalgError::Shape("ragged rows".into()));
            }
            for entry in row {
                if entry.conductor() != conductor {
                    return Err(ScalarError::ConductorMismatch(conductor, entry.conductor()).into());
                }
                data.push(entry.clone());
            }
        }
        Ok(Matrix {
            rows: nrows,
            cols: ncols,
            conductor,
            data,
        })
    }

    /// Integer convenience constructor used heavily in tests.
    pub fn from_i64_rows(rows: &[&[i64]], conductor: u32) -> Self {
        let converted = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&v| CycScalar::from_int(conductor, v))
                    .collect()
            })
            .collect();
        Self::from_rows(converted, conductor).expect("rectangular integer matrix")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn conductor(&self) -> u32 {
        self.conductor
    }

    pub fn get(&self, i: usize, j: usize) -> &CycScalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: CycScalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_identity(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                let e = self.get(i, j);
                if i == j && !e.is_one() {
                    return false;
                }
                if i != j && !e.is_zero() {
                    return false;
                }
            }
        }
        true
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Shape(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zero(self.rows, other.cols, self.conductor);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = CycScalar::zero(self.conductor);
                for k in 0..self.cols {
                    acc = acc.checked_add(&self.get(i, k).checked_mul(other.get(k, j))?)?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[CycScalar]) -> Result<Vec<CycScalar>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::Shape("matrix-vector size".into()));
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = CycScalar::zero(self.conductor);
            for k in 0..self.cols {
                acc = acc.checked_add(&self.get(i, k).checked_mul(&v[k])?)?;
            }
            out.push(acc);
        }
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Result<Matrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::Shape("power of non-square matrix".into()));
        }
        let mut acc = Matrix::identity(self.rows, self.conductor);
        for _ in 0..e {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::Shape("subtraction shape".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = a.checked_sub(b)?;
        }
        Ok(out)
    }

    /// Gauss-Jordan inverse; errors when singular.
    pub fn inverse(&self) -> Result<Matrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::Shape("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let mut work = self.clone();
        let mut inv = Matrix::identity(n, self.conductor);
        for col in 0..n {
            let pivot_row = (col..n).find(|&r| !work.get(r, col).is_zero());
            let pivot_row = pivot_row.ok_or(LinalgError::Singular)?;
            if pivot_row != col {
                work.swap_rows(pivot_row, col);
                inv.swap_rows(pivot_row, col);
            }
            let pivot_inv = work.get(col, col).checked_inv()?;
            work.scale_row(col, &pivot_inv)?;
            inv.scale_row(col, &pivot_inv)?;
            for r in 0..n {
                if r == col || work.get(r, col).is_zero() {
                    continue;
                }
                let factor = work.get(r, col).clone();
                work.row_axpy(r, col, &factor)?;
                inv.row_axpy(r, col, &factor)?;
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn scale_row(&mut self, r: usize, factor: &CycScalar) -> Result<(), LinalgError> {
        for j in 0..self.cols {
            let v = self.get(r, j).checked_mul(factor)?;
            self.set(r, j, v);
        }
        Ok(())
    }

    /// row r -= factor * row src
    fn row_axpy(&mut self, r: usize, src: usize, factor: &CycScalar) -> Result<(), LinalgError> {
        for j in 0..self.cols {
            let v = self
                .get(r, j)
                .checked_sub(&factor.checked_mul(self.get(src, j))?)?;
            self.set(r, j, v);
        }
        Ok(())
    }

    /// Reduced row echelon form; returns the transformed matrix and the
    /// pivot column indices in order.
    pub fn rref(&self) -> Result<(Matrix, Vec<usize>), LinalgError> {
        let mut work = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0usize;
        for col in 0..work.cols {
            if row >= work.rows {
                break;
            }
            let pivot_row = (row..work.rows).find(|&r| !work.get(r, col).is_zero());
            let Some(pivot_row) = pivot_row else {
                continue;
            };
            if pivot_row != row {
                work.swap_rows(pivot_row, row);
            }
            let pivot_inv = work.get(row, col).checked_inv()?;
            work.scale_row(row, &pivot_inv)?;
            for r in 0..work.rows {
                if r == row || work.get(r, col).is_zero() {
                    continue;
                }
                let factor = work.get(r, col).clone();
                work.row_axpy(r, row, &factor)?;
            }
            pivots.push(col);
            row += 1;
        }
        Ok((work, pivots))
    }

    /// Canonical nullspace basis: one vector per free column, in column
    /// order, each with a 1 in its free position.
    pub fn nullspace(&self) -> Result<Vec<Vec<CycScalar>>, LinalgError> {
        let (r, pivots) = self.rref()?;
        let mut basis = Vec::new();
        let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
        for free in 0..self.cols {
            if pivot_set.contains(&free) {
                continue;
            }
            let mut v = vec![CycScalar::zero(self.conductor); self.cols];
            v[free] = CycScalar::one(self.conductor);
            for (prow, &pcol) in pivots.iter().enumerate() {
                v[pcol] = r.get(prow, free).neg();
            }
            basis.push(v);
        }
        Ok(basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Matrix::from_i64_rows(&[&[1, 1], &[0, 1]], 1);
        let inv = m.inverse().unwrap();
        assert!(m.mul(&inv).unwrap().is_identity());
        assert_eq!(inv, Matrix::from_i64_rows(&[&[1, -1], &[0, 1]], 1));
    }

    #[test]
    fn singular_detected() {
        let m = Matrix::from_i64_rows(&[&[1, 2], &[2, 4]], 1);
        assert!(matches!(m.inverse(), Err(LinalgError::Singular)));
    }

    #[test]
    fn nullspace_basic() {
        // x + 2y + 3z = 0 has a 2-dimensional nullspace
        let m = Matrix::from_i64_rows(&[&[1, 2, 3]], 1);
        let ns = m.nullspace().unwrap();
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let out = m.mul_vec(v).unwrap();
            assert!(out.iter().all(|c| c.is_zero()));
        }
    }

    #[test]
    fn nullspace_trivial_for_invertible() {
        let m = Matrix::from_i64_rows(&[&[2, 1], &[1, 1]], 1);
        assert!(m.nullspace().unwrap().is_empty());
    }

    #[test]
    fn power_of_order3_matrix() {
        let m = Matrix::from_i64_rows(&[&[0, -1], &[1, -1]], 1);
        assert!(!m.pow(1).unwrap().is_identity());
        assert!(!m.pow(2).unwrap().is_identity());
        assert!(m.pow(3).unwrap().is_identity());
    }
}
