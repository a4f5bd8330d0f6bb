//! Compressed-column sparse real matrices.
//!
//! The supra adjacency and supra transition operators of a multilayer
//! network are stored here. Matrices are immutable once built, so a single
//! instance can be shared across threads solving different windows.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) is outside a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("entry ({row}, {col}) has non-finite value {value}")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error(
        "entry ({row}, {col}) is negative ({value}); column normalization needs non-negative input"
    )]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("dimension mismatch: expected vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// How zero-sum columns are reported by [`SparseMatrix::column_normalize`].
///
/// Both policies leave the column empty in the matrix; the mask is always
/// returned. `UniformRestartFlag` tells the solver to send the mass sitting
/// on those columns back through the teleport distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DanglingPolicy {
    ZeroColumn,
    #[default]
    UniformRestartFlag,
}

/// Compressed sparse column matrix of `f64`.
///
/// ```text
/// col_offsets.len() == n_cols + 1
/// row_indices[col_offsets[j]..col_offsets[j + 1]] strictly increasing
/// values: finite, never exactly zero
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    col_offsets: Vec<usize>,
    row_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and entries that cancel to zero are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        for &(row, col, value) in triplets {
            if row >= n_rows || col >= n_cols {
                return Err(SparseError::IndexOutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
            if !value.is_finite() {
                return Err(SparseError::NonFinite { row, col, value });
            }
        }

        // counting sort by column, then a stable sort by row inside each column
        let mut counts = vec![0usize; n_cols + 1];
        for &(_, col, _) in triplets {
            counts[col + 1] += 1;
        }
        for j in 0..n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut scratch = vec![(0usize, 0.0f64); triplets.len()];
        for &(row, col, value) in triplets {
            scratch[next[col]] = (row, value);
            next[col] += 1;
        }

        let mut col_offsets = Vec::with_capacity(n_cols + 1);
        let mut row_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_offsets.push(0);
        for j in 0..n_cols {
            let column = &mut scratch[counts[j]..counts[j + 1]];
            column.sort_by_key(|&(row, _)| row);
            let mut k = 0;
            while k < column.len() {
                let row = column[k].0;
                let mut sum = 0.0;
                while k < column.len() && column[k].0 == row {
                    sum += column[k].1;
                    k += 1;
                }
                if !sum.is_finite() {
                    return Err(SparseError::NonFinite {
                        row,
                        col: j,
                        value: sum,
                    });
                }
                if sum != 0.0 {
                    row_indices.push(row);
                    values.push(sum);
                }
            }
            col_offsets.push(row_indices.len());
        }

        Ok(Self {
            n_rows,
            n_cols,
            col_offsets,
            row_indices,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            col_offsets: vec![0; n_cols + 1],
            row_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            col_offsets: (0..=n).collect(),
            row_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_offsets(&self) -> &[usize] {
        &self.col_offsets
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values stored in column `col`.
    pub fn column(&self, col: usize) -> (&[usize], &[f64]) {
        let range = self.col_offsets[col]..self.col_offsets[col + 1];
        (&self.row_indices[range.clone()], &self.values[range])
    }

    /// Stored value at `(row, col)`, zero if absent.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row >= self.n_rows || col >= self.n_cols {
            return 0.0;
        }
        let (rows, vals) = self.column(col);
        match rows.binary_search(&row) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_cols).flat_map(move |j| {
            let (rows, vals) = self.column(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n_cols)
            .map(|j| self.column(j).1.iter().sum())
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && self.iter().all(|(i, j, v)| self.get(j, i) == v)
    }

    /// Divides every column by its sum. Zero-sum columns stay empty and are
    /// flagged in the returned mask.
    pub fn column_normalize(
        &self,
        _policy: DanglingPolicy,
    ) -> Result<(SparseMatrix, Vec<bool>), SparseError> {
        if let Some((row, col, value)) = self.iter().find(|&(_, _, v)| v < 0.0) {
            return Err(SparseError::NegativeEntry { row, col, value });
        }
        let mut values = self.values.clone();
        let mut dangling = vec![false; self.n_cols];
        for (j, flag) in dangling.iter_mut().enumerate() {
            let range = self.col_offsets[j]..self.col_offsets[j + 1];
            let sum: f64 = values[range.clone()].iter().sum();
            if sum > 0.0 {
                for v in &mut values[range] {
                    *v /= sum;
                }
            } else {
                *flag = true;
            }
        }
        let normalized = SparseMatrix {
            values,
            ..self.clone()
        };
        Ok((normalized, dangling))
    }

    /// Returns `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, SparseError> {
        let mut out = vec![0.0; self.n_rows];
        self.matvec_into(v, &mut out)?;
        Ok(out)
    }

    /// Writes `self * v` into `out`, overwriting its contents.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) -> Result<(), SparseError> {
        self.check_dims(v, out)?;
        out.fill(0.0);
        for (j, &x) in v.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let (rows, vals) = self.column(j);
            for (&i, &a) in rows.iter().zip(vals) {
                out[i] += a * x;
            }
        }
        Ok(())
    }

    /// Parallel variant of [`matvec_into`](Self::matvec_into).
    ///
    /// Columns are split into fixed chunks whose partial products are summed
    /// in chunk order, so the result depends on `chunks` but not on thread
    /// scheduling. It can differ from the sequential product in the last bits.
    pub fn par_matvec_into(
        &self,
        v: &[f64],
        out: &mut [f64],
        chunks: usize,
    ) -> Result<(), SparseError> {
        self.check_dims(v, out)?;
        let chunks = chunks.clamp(1, self.n_cols.max(1));
        let width = self.n_cols.div_ceil(chunks).max(1);
        let partials: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![0.0; self.n_rows];
                let end = ((c + 1) * width).min(self.n_cols);
                let begin = (c * width).min(end);
                for (j, &x) in v.iter().enumerate().take(end).skip(begin) {
                    let (rows, vals) = self.column(j);
                    for (&i, &a) in rows.iter().zip(vals) {
                        acc[i] += a * x;
                    }
                }
                acc
            })
            .collect();
        out.fill(0.0);
        for partial in &partials {
            for (o, p) in out.iter_mut().zip(partial) {
                *o += p;
            }
        }
        Ok(())
    }

    fn check_dims(&self, v: &[f64], out: &[f64]) -> Result<(), SparseError> {
        if v.len() != self.n_cols {
            return Err(SparseError::DimensionMismatch {
                expected: self.n_cols,
                actual: v.len(),
            });
        }
        if out.len() != self.n_rows {
            return Err(SparseError::DimensionMismatch {
                expected: self.n_rows,
                actual: out.len(),
            });
        }
        Ok(())
    }

    /// Row-major dense copy. Intended for tests and small debug dumps.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, j, v) in self.iter() {
            dense[i][j] = v;
        }
        dense
    }

    /// Writes the matrix in MatrixMarket coordinate format (1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}
