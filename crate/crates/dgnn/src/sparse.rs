//! Compressed-sparse-row matrices and the sparse-dense multiply kernel.

use crate::dense::Dense;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Sparse matrix in CSR layout. Column indices are strictly increasing
/// within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    /// Build from entries sorted by (row, col) with no duplicates.
    /// Panics if the ordering contract is violated.
    pub fn from_sorted_entries(
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, T)],
    ) -> Self {
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut prev: Option<(usize, usize)> = None;
        for &(r, c, v) in entries {
            assert!(r < nrows && c < ncols, "entry out of bounds");
            if let Some(p) = prev {
                assert!((r, c) > p, "entries must be sorted and unique");
            }
            prev = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Value at (i, j), or zero if the entry is absent.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&c, &v)| (i, c, v))
        })
    }

    /// Sparse * dense product.
    pub fn matmul_dense(&self, dense: &Dense<T>) -> Result<Dense<T>> {
        if self.ncols != dense.rows() {
            return Err(Error::Shape(format!(
                "spmm: ({}x{}) * ({}x{})",
                self.nrows,
                self.ncols,
                dense.rows(),
                dense.cols()
            )));
        }
        let mut out = Dense::zeros(self.nrows, dense.cols());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let out_row = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, &d) in out_row.iter_mut().zip(dense.row(j)) {
                    *o = *o + v * d;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Dense<T> {
        let mut out = Dense::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter_entries() {
            out.set(i, j, v);
        }
        out
    }
}
