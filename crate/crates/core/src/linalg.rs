//! Small dense complex matrices and an LU factorization with partial pivoting.
//!
//! Boundary matrices in this crate are `rm x rm` with `rm` rarely above a few
//! dozen, so everything here is plain row-major storage without blocking.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim, dim);
        for i in 0..dim {
            out[(i, i)] = ONE;
        }
        out
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn column(values: &[Complex64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }

    pub fn mul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for p in 0..self.cols {
                let a = self[(i, p)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[p * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &CMatrix, scale: Complex64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} to {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `P A = L U` with unit lower-triangular `L`, stored packed.
#[derive(Debug, Clone)]
pub struct LuDecomposition {
    lu: CMatrix,
    pivots: Vec<usize>,
    input_norm_one: f64,
    singular: bool,
}

impl LuDecomposition {
    pub fn factor(matrix: &CMatrix) -> Result<Self> {
        if matrix.rows != matrix.cols {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                matrix.rows, matrix.cols
            )));
        }
        let dim = matrix.rows;
        let mut lu = matrix.clone();
        let mut pivots: Vec<usize> = (0..dim).collect();
        let mut singular = false;

        for k in 0..dim {
            let (p, pivot_abs) = (k..dim)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..dim {
                    lu.data.swap(k * dim + j, p * dim + j);
                }
                pivots.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..dim {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == ZERO {
                    continue;
                }
                for j in k + 1..dim {
                    let delta = factor * lu[(k, j)];
                    lu[(i, j)] -= delta;
                }
            }
        }

        Ok(Self {
            lu,
            pivots,
            input_norm_one: matrix.norm_one(),
            singular,
        })
    }

    pub fn dimension(&self) -> usize {
        self.lu.rows
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let dim = self.dimension();
        if rhs.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has length {}, expected {dim}",
                rhs.len()
            )));
        }
        if self.singular {
            return Err(Error::NotUniquelySolvable {
                condition: f64::INFINITY,
            });
        }
        let mut x: Vec<Complex64> = self.pivots.iter().map(|&p| rhs[p]).collect();
        for i in 0..dim {
            for j in 0..i {
                let delta = self.lu[(i, j)] * x[j];
                x[i] -= delta;
            }
        }
        for i in (0..dim).rev() {
            for j in i + 1..dim {
                let delta = self.lu[(i, j)] * x[j];
                x[i] -= delta;
            }
            x[i] /= self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        let dim = self.dimension();
        let mut inv = CMatrix::zeros(dim, dim);
        let mut basis = vec![ZERO; dim];
        for j in 0..dim {
            basis.fill(ZERO);
            basis[j] = ONE;
            let col = self.solve(&basis)?;
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        Ok(inv)
    }

    /// One-norm condition number `|A|_1 |A^-1|_1`, infinite for exact singularity.
    ///
    /// Computed from the explicit inverse; the matrices here are small.
    pub fn condition_one(&self) -> f64 {
        if self.singular {
            return f64::INFINITY;
        }
        match self.inverse() {
            Ok(inv) => {
                let c = self.input_norm_one * inv.norm_one();
                if c.is_finite() {
                    c
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    }
}
