//! Row-major dense matrices and the handful of products the models need.
//!
//! The multiply kernels skip zero entries of the left operand, which makes
//! products against sparse-ish feature matrices (bag-of-words rows, dropout
//! output) cheap without a separate sparse type.

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Build from a flat row-major vector. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "flat data length mismatch");
        Dense { rows, cols, data }
    }

    /// Build from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Dense { rows: r, cols: c, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Copy the given rows into a new matrix (row gather).
    pub fn select_rows(&self, idx: &[usize]) -> Dense<T> {
        let mut out = Dense::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Dense<T> {
        Dense {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Dense<T>) -> Dense<T> {
        assert_eq!(self.shape(), other.shape(), "hadamard shape mismatch");
        Dense {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a * b)
                .collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, other: &Dense<T>, alpha: T) {
        assert_eq!(self.shape(), other.shape(), "add_scaled shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: T) {
        self.data.iter_mut().for_each(|x| *x = *x * alpha);
    }

    pub fn transpose(&self) -> Dense<T> {
        let mut out = Dense::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self * other`, skipping zero entries of `self`.
    pub fn matmul(&self, other: &Dense<T>) -> Result<Dense<T>> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul: ({}x{}) * ({}x{})",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Dense::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * otherᵀ`.
    pub fn matmul_nt(&self, other: &Dense<T>) -> Result<Dense<T>> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "matmul_nt: ({}x{}) * ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Dense::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                let b_row = other.row(j);
                let mut acc = T::zero();
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc = acc + a * b;
                }
                *o = acc;
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other`, skipping zero entries of `self`.
    pub fn transpose_matmul(&self, other: &Dense<T>) -> Result<Dense<T>> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "transpose_matmul: ({}x{})ᵀ * ({}x{})",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Dense::zeros(self.cols, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let b_row = other.row(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let out_row = out.row_mut(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Dense<T>) -> T {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Convert entries to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&x| U::from_f64_lossy(x.to_f64_lossy()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matmul_hand_example() {
        let a = Dense::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Dense::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.row(0), &[19.0, 22.0]);
        assert_eq!(c.row(1), &[43.0, 50.0]);
    }

    #[test]
    fn matmul_shape_error() {
        let a = Dense::<f64>::zeros(2, 3);
        let b = Dense::<f64>::zeros(2, 3);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn transpose_matmul_matches_explicit_transpose() {
        let a = Dense::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 4.0]]);
        let b = Dense::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]]);
        let direct = a.transpose_matmul(&b).unwrap();
        let via_t = a.transpose().matmul(&b).unwrap();
        assert!(direct.max_abs_diff(&via_t) == 0.0);
    }

    #[test]
    fn matmul_nt_matches_explicit_transpose() {
        let a = Dense::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Dense::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0], vec![9.0, 10.0]]);
        let direct = a.matmul_nt(&b).unwrap();
        let via_t = a.matmul(&b.transpose()).unwrap();
        assert!(direct.max_abs_diff(&via_t) == 0.0);
    }

    #[test]
    fn works_at_f32() {
        let a = Dense::<f32>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let c = a.matmul(&a).unwrap();
        assert_eq!(c.get(0, 0), 7.0);
    }

    proptest! {
        #[test]
        fn matmul_associates_with_vector(seed in 0u64..500) {
            // (A*B)*v == A*(B*v) within fp tolerance
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 5;
            let mut a = Dense::<f64>::zeros(n, n);
            let mut b = Dense::<f64>::zeros(n, n);
            let mut v = Dense::<f64>::zeros(n, 1);
            for i in 0..n {
                for j in 0..n {
                    a.set(i, j, rng.gen_range(-1.0..1.0));
                    b.set(i, j, rng.gen_range(-1.0..1.0));
                }
                v.set(i, 0, rng.gen_range(-1.0..1.0));
            }
            let left = a.matmul(&b).unwrap().matmul(&v).unwrap();
            let right = a.matmul(&b.matmul(&v).unwrap()).unwrap();
            prop_assert!(left.max_abs_diff(&right) < 1e-12);
        }
    }
}
