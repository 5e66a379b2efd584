use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// A fixed `rows × cols` feature matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Empty("design matrix"));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("X", "entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::param("X", "ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn intercept_only(rows: usize) -> Result<Self> {
        Self::new(rows, 1, vec![1.0; rows])
    }

    /// Rows drawn i.i.d. from `N(mean·1, var·I)`.
    pub fn gaussian<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        mean: f64,
        var: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let normal =
            Normal::new(mean, var.sqrt()).map_err(|e| Error::param("var", e.to_string()))?;
        Self::new(
            rows,
            cols,
            (0..rows * cols).map(|_| normal.sample(rng)).collect(),
        )
    }

    /// Prepends a column of ones.
    pub fn with_intercept(&self) -> Self {
        let mut data = Vec::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            data.push(1.0);
            data.extend_from_slice(self.row(r));
        }
        Self {
            rows: self.rows,
            cols: self.cols + 1,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `X β`.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect()
    }

    /// Column-major copy, convenient for coordinate descent.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c)).collect())
            .collect()
    }

    /// The submatrix formed by the given rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let data = rows
            .iter()
            .flat_map(|&r| self.row(r).iter().copied())
            .collect();
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}
