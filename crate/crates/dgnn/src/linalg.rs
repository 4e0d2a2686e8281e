//! Small dense solves for the regression oracles.

use crate::dense::Dense;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
/// Intended for the small systems of the synthetic checks.
pub fn solve<T: Scalar>(a: &Dense<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::Shape(format!(
            "solve: ({}x{}) with rhs of length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        let mut best = m.get(col, col).abs();
        for r in (col + 1)..n {
            let v = m.get(r, col).abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best <= T::from_f64_lossy(1e-12) {
            return Err(Error::Validation(
                "singular design matrix in linear solve".into(),
            ));
        }
        if pivot != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(pivot, c));
                m.set(pivot, c, tmp);
            }
            x.swap(col, pivot);
        }
        let diag = m.get(col, col);
        for r in (col + 1)..n {
            let factor = m.get(r, col) / diag;
            if factor == T::zero() {
                continue;
            }
            for c in col..n {
                m.set(r, c, m.get(r, c) - factor * m.get(col, c));
            }
            x[r] = x[r] - factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for c in (col + 1)..n {
            acc = acc - m.get(col, c) * x[c];
        }
        x[col] = acc / m.get(col, col);
    }
    Ok(x)
}

/// Ordinary least squares: minimize `‖Z β − y‖²` via the normal
/// equations. `z` is n×k with n ≥ k.
pub fn ols<T: Scalar>(z: &Dense<T>, y: &[T]) -> Result<Vec<T>> {
    if z.rows() != y.len() {
        return Err(Error::Shape(format!(
            "ols: {} rows but {} targets",
            z.rows(),
            y.len()
        )));
    }
    let ztz = z.transpose_matmul(z)?;
    let k = z.cols();
    let mut zty = vec![T::zero(); k];
    for i in 0..z.rows() {
        let row = z.row(i);
        for j in 0..k {
            zty[j] = zty[j] + row[j] * y[i];
        }
    }
    solve(&ztz, &zty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_hand_system() {
        let a = Dense::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = solve(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_error() {
        let a = Dense::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve(&a, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ols_recovers_exact_linear_model() {
        let z = Dense::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, -1.0],
        ]);
        let beta = [1.5, -0.5];
        let y: Vec<f64> = (0..4)
            .map(|i| z.get(i, 0) * beta[0] + z.get(i, 1) * beta[1])
            .collect();
        let est = ols(&z, &y).unwrap();
        assert!((est[0] - beta[0]).abs() < 1e-12);
        assert!((est[1] - beta[1]).abs() < 1e-12);
    }
}
