//! Fixed-capacity vectors and matrices for the 3- and 4-compartment systems.
//!
//! Everything here is `Copy` and allocation-free; the integrator and the
//! adjoint sweeps call into these types millions of times per solve.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Largest state dimension handled by [`StateVec`].
pub const MAX_STATE: usize = 4;
/// Largest matrix dimension handled by [`SmallMatrix`].
pub const MAX_MATRIX: usize = 6;

/// Compartment densities (or their time derivatives, or costates) at one instant.
#[derive(Clone, Copy, PartialEq)]
pub struct StateVec {
    values: [f64; MAX_STATE],
    dim: usize,
}

impl StateVec {
    pub fn zeros(dim: usize) -> Self {
        assert!(
            (1..=MAX_STATE).contains(&dim),
            "state dimension {dim} out of range"
        );
        StateVec {
            values: [0.0; MAX_STATE],
            dim,
        }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut s = StateVec::zeros(values.len());
        s.values[..values.len()].copy_from_slice(values);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values[..self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.as_slice().iter()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn norm_inf(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + scale * other`
    pub fn axpy(&self, scale: f64, other: &StateVec) -> StateVec {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            out.values[i] += scale * other.values[i];
        }
        out
    }

    pub fn scaled(&self, scale: f64) -> StateVec {
        let mut out = *self;
        for v in out.as_mut_slice() {
            *v *= scale;
        }
        out
    }

    pub fn add_assign_scaled(&mut self, scale: f64, other: &StateVec) {
        debug_assert_eq!(self.dim, other.dim);
        for i in 0..self.dim {
            self.values[i] += scale * other.values[i];
        }
    }

    pub fn dot(&self, other: &StateVec) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &StateVec) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<usize> for StateVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for StateVec {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl fmt::Debug for StateVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl fmt::Display for StateVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Dense square matrix of dimension 1..=6.
#[derive(Clone, Copy, PartialEq)]
pub struct SmallMatrix {
    data: [[f64; MAX_MATRIX]; MAX_MATRIX],
    dim: usize,
}

impl SmallMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(
            (1..=MAX_MATRIX).contains(&dim),
            "matrix dimension {dim} out of range"
        );
        SmallMatrix {
            data: [[0.0; MAX_MATRIX]; MAX_MATRIX],
            dim,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SmallMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i][i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || n > MAX_MATRIX {
            return Err(Error::NumericalFailure(format!(
                "matrix dimension {n} outside 1..={MAX_MATRIX}"
            )));
        }
        let mut m = SmallMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NumericalFailure(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "entry ({i},{j}) is not finite"
                    )));
                }
                m.data[i][j] = v;
            }
        }
        Ok(m)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = SmallMatrix::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i][i] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i][j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i][i]).sum()
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.data[i][j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.data[i][j].is_finite()))
    }

    pub fn mul(&self, other: &SmallMatrix) -> SmallMatrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = SmallMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[i][j] = (0..n).map(|k| self.data[i][k] * other.data[k][j]).sum();
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &StateVec) -> StateVec {
        assert_eq!(self.dim, x.dim());
        let mut out = StateVec::zeros(x.dim());
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.data[i][j] * x[j]).sum();
        }
        out
    }

    /// `selfᵀ x`
    pub fn transpose_mul_vec(&self, x: &StateVec) -> StateVec {
        assert_eq!(self.dim, x.dim());
        let mut out = StateVec::zeros(x.dim());
        for j in 0..self.dim {
            out[j] = (0..self.dim).map(|i| self.data[i][j] * x[i]).sum();
        }
        out
    }

    pub fn max_abs_diff(&self, other: &SmallMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut m = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max((self.data[i][j] - other.data[i][j]).abs());
            }
        }
        m
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.dim;
        let mut a = self.data;
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
                .unwrap_or(col);
            if a[pivot][col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                a.swap(pivot, col);
                det = -det;
            }
            det *= a[col][col];
            for r in col + 1..n {
                let factor = a[r][col] / a[col][col];
                let (top, bottom) = a.split_at_mut(r);
                for (x, p) in bottom[0][col..n].iter_mut().zip(&top[col][col..n]) {
                    *x -= factor * p;
                }
            }
        }
        det
    }

    /// Solves `self · x = rhs` (dimension must match the state capacity).
    pub fn solve(&self, rhs: &StateVec) -> Result<StateVec> {
        let n = self.dim;
        assert_eq!(n, rhs.dim());
        let mut a = self.data;
        let mut b = *rhs;
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
                .unwrap_or(col);
            if a[pivot][col].abs() <= 1e-14 * scale {
                return Err(Error::NumericalFailure("singular linear system".into()));
            }
            if pivot != col {
                a.swap(pivot, col);
                let tmp = b[pivot];
                b[pivot] = b[col];
                b[col] = tmp;
            }
            for r in col + 1..n {
                let factor = a[r][col] / a[col][col];
                if factor != 0.0 {
                    let (top, bottom) = a.split_at_mut(r);
                    for (x, p) in bottom[0][col..n].iter_mut().zip(&top[col][col..n]) {
                        *x -= factor * p;
                    }
                    b[r] -= factor * b[col];
                }
            }
        }
        let mut x = StateVec::zeros(n);
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        Ok(x)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.data[i][..self.dim].to_vec())
            .collect()
    }
}

impl fmt::Debug for SmallMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}
