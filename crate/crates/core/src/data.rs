//! The observation container shared by every analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x p` predictor block with a length-`n` response.
///
/// Predictors are stored column-major: every analysis in this crate walks one
/// predictor at a time across all observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    column_names: Option<Vec<String>>,
}

impl DataMatrix {
    /// Builds a matrix from column-major predictor storage and validates it.
    pub fn from_columns(n: usize, p: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let data = Self::from_columns_unchecked(n, p, x, y)?;
        data.validate()?;
        Ok(data)
    }

    /// Builds a matrix from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::DimensionError(format!(
                "row {bad} has {} predictors, expected {p}",
                rows[bad].len()
            )));
        }
        let mut x = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                x[j * n + i] = v;
            }
        }
        Self::from_columns(n, p, x, y)
    }

    /// Shape and finiteness checks only. Variance checks are skipped, which
    /// lets callers hold data that some analyses would reject.
    pub fn from_columns_unchecked(n: usize, p: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != n * p {
            return Err(Error::DimensionError(format!(
                "predictor storage has {} entries, expected {n} x {p}",
                x.len()
            )));
        }
        if y.len() != n {
            return Err(Error::DimensionError(format!(
                "response has length {}, expected {n}",
                y.len()
            )));
        }
        if p == 0 {
            return Err(Error::DimensionError("no predictors".into()));
        }
        for (idx, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: idx % n, column: idx / n });
            }
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, column: p });
        }
        Ok(Self { n, p, x, y, column_names: None })
    }

    /// Enforces `n >= 3` and nonzero sample variance in every column and in
    /// the response.
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InsufficientData(format!(
                "need at least 3 observations, got {}",
                self.n
            )));
        }
        for j in 0..self.p {
            if is_constant(self.column(j)) {
                return Err(Error::DegenerateScale { column: j, observation: None });
            }
        }
        if is_constant(&self.y) {
            return Err(Error::DegenerateScale { column: self.p, observation: None });
        }
        Ok(())
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::DimensionError(format!(
                "{} column names for {} predictors",
                names.len(),
                self.p
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[j * self.n + i]
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.n)
    }

    /// Column-major predictor storage.
    pub fn x_raw(&self) -> &[f64] {
        &self.x
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Returns a copy restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n) {
            return Err(Error::InvalidArgument(format!(
                "row index {bad} out of range for {} observations",
                self.n
            )));
        }
        let m = rows.len();
        let mut x = Vec::with_capacity(m * self.p);
        for col in self.columns() {
            x.extend(rows.iter().map(|&i| col[i]));
        }
        let y = rows.iter().map(|&i| self.y[i]).collect();
        Ok(Self {
            n: m,
            p: self.p,
            x,
            y,
            column_names: self.column_names.clone(),
        })
    }

    /// Same predictors, new response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        let mut out = Self::from_columns_unchecked(self.n, self.p, self.x.clone(), y)?;
        out.column_names = self.column_names.clone();
        Ok(out)
    }
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}
