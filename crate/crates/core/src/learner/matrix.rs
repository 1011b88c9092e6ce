use alloc::vec::Vec;

use super::LearnError;

/// Dense row-major matrix of `f64` features. `NaN` marks a missing value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(n_cols: usize, rows: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            data: Vec::with_capacity(rows * n_cols),
        }
    }

    pub fn from_vec(n_cols: usize, data: Vec<f64>) -> Result<Self, LearnError> {
        if n_cols == 0 {
            if !data.is_empty() {
                return Err(LearnError::LengthMismatch {
                    what: "matrix data",
                    expected: 0,
                    found: data.len(),
                });
            }
            return Ok(Self::new(0));
        }
        if data.len() % n_cols != 0 {
            return Err(LearnError::LengthMismatch {
                what: "matrix data",
                expected: (data.len() / n_cols + 1) * n_cols,
                found: data.len(),
            });
        }
        Ok(Self {
            n_rows: data.len() / n_cols,
            n_cols,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(n_cols: usize, rows: &[R]) -> Result<Self, LearnError> {
        let mut m = Self::with_capacity(n_cols, rows.len());
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), LearnError> {
        if row.len() != self.n_cols {
            return Err(LearnError::DimensionMismatch {
                expected: self.n_cols,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.n_rows += 1;
        Ok(())
    }

    /// Appends all rows of `other`, which must have the same width.
    pub fn append(&mut self, other: &FeatureMatrix) -> Result<(), LearnError> {
        if other.n_cols != self.n_cols {
            return Err(LearnError::DimensionMismatch {
                expected: self.n_cols,
                found: other.n_cols,
            });
        }
        self.data.extend_from_slice(&other.data);
        self.n_rows += other.n_rows;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }
}
