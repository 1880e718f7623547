use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::error::{check_len, Result};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![s; n],
        }
    }

    /// Assembles from (row, col, value) triplets, summing duplicates. Exact zeros are kept
    /// so that the sparsity pattern does not depend on the values.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; rows + 1];
        for &(i, j, _) in triplets {
            assert!(i < rows && j < cols, "triplet ({i}, {j}) out of range");
            counts[i + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            entries[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for i in 0..rows {
            let seg = &mut entries[counts[i]..counts[i + 1]];
            seg.sort_by_key(|e| e.0);
            for &(j, v) in seg.iter() {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { rows, cols, row_ptr, col_idx, values }
    }

    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                let v = a.get(i, j);
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.rows(), a.cols(), &t)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d.add_to(i, j, v);
        }
        d
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        let mut y = vec![0.0; self.rows];
        self.mul_add_into(1.0, x, &mut y);
        Ok(y)
    }

    /// y += alpha * A x
    #[inline]
    pub fn mul_add_into(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            let s: f64 = c.iter().zip(v).map(|(&j, a)| a * x[j]).sum();
            *yi += alpha * s;
        }
    }

    /// y += alpha * Aᵀ x
    #[inline]
    pub fn mul_t_add_into(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                y[j] += alpha * a * xi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.rows, &t)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Returns `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<Self> {
        check_len(self.rows, other.rows)?;
        check_len(self.cols, other.cols)?;
        let t: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| (i, j, a * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, b * v)))
            .collect();
        Ok(Self::from_triplets(self.rows, self.cols, &t))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.triplets().all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol)
    }
}
