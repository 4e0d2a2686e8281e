//! Two-layer GNN models with hand-derived reverse-mode gradients.

pub mod adam;
pub mod checkpoint;
pub mod gat;
pub mod gcn;
pub mod gradcheck;
pub mod loss;

use rand::Rng;

use crate::dense::Dense;
use crate::scalar::Scalar;

/// A parameter matrix paired with its gradient storage.
#[derive(Debug, Clone)]
pub struct ParamTensor<T> {
    pub value: Dense<T>,
    pub grad: Dense<T>,
}

impl<T: Scalar> ParamTensor<T> {
    pub fn new(value: Dense<T>) -> Self {
        let grad = Dense::zeros(value.rows(), value.cols());
        ParamTensor { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Uniform init over [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
/// Draws are made in f64 so the stream is scalar-type independent.
pub fn glorot_uniform<T: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Dense<T> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let mut out = Dense::zeros(rows, cols);
    for v in out.data_mut() {
        *v = T::from_f64_lossy(rng.gen_range(-a..a));
    }
    out
}

/// Inverted-dropout mask: entries are 0 with probability `rate`, else
/// `1/(1-rate)`. `rate` must be in [0, 1).
pub fn dropout_mask<T: Scalar, R: Rng>(
    rows: usize,
    cols: usize,
    rate: f64,
    rng: &mut R,
) -> Dense<T> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0,1)");
    let keep = 1.0 - rate;
    let scale = T::from_f64_lossy(1.0 / keep);
    let mut out = Dense::zeros(rows, cols);
    for v in out.data_mut() {
        *v = if rng.gen::<f64>() < keep {
            scale
        } else {
            T::zero()
        };
    }
    out
}

/// Inverted dropout applied in place of `x`, drawing only for nonzero
/// entries (zeros are unaffected by dropout and sparse feature matrices
/// dominate the draw count otherwise).
pub fn dropout_nonzero<T: Scalar, R: Rng>(x: &Dense<T>, rate: f64, rng: &mut R) -> Dense<T> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0,1)");
    let keep = 1.0 - rate;
    let scale = T::from_f64_lossy(1.0 / keep);
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v == T::zero() {
            continue;
        }
        *v = if rng.gen::<f64>() < keep {
            *v * scale
        } else {
            T::zero()
        };
    }
    out
}

pub fn relu<T: Scalar>(x: &Dense<T>) -> Dense<T> {
    x.map(|v| v.max(T::zero()))
}

/// 1 where the pre-activation is positive, else 0.
pub fn relu_mask<T: Scalar>(pre: &Dense<T>) -> Dense<T> {
    pre.map(|v| if v > T::zero() { T::one() } else { T::zero() })
}

pub fn elu<T: Scalar>(x: &Dense<T>) -> Dense<T> {
    x.map(|v| if v > T::zero() { v } else { v.exp() - T::one() })
}

/// Derivative of ELU evaluated at the pre-activation.
pub fn elu_grad<T: Scalar>(pre: &Dense<T>) -> Dense<T> {
    pre.map(|v| if v > T::zero() { T::one() } else { v.exp() })
}

#[inline]
pub fn leaky_relu<T: Scalar>(v: T, slope: T) -> T {
    if v > T::zero() {
        v
    } else {
        slope * v
    }
}

#[inline]
pub fn leaky_relu_grad<T: Scalar>(v: T, slope: T) -> T {
    if v > T::zero() {
        T::one()
    } else {
        slope
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w: Dense<f64> = glorot_uniform(20, 30, &mut rng);
        let a = (6.0 / 50.0f64).sqrt();
        assert!(w.data().iter().all(|&v| v.abs() <= a));
    }

    #[test]
    fn dropout_zero_rate_is_identity_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m: Dense<f64> = dropout_mask(4, 4, 0.0, &mut rng);
        assert!(m.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dropout_mask_is_unbiased_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m: Dense<f64> = dropout_mask(200, 200, 0.5, &mut rng);
        let mean = m.data().iter().sum::<f64>() / (200.0 * 200.0);
        assert!((mean - 1.0).abs() < 0.02);
    }

    #[test]
    fn elu_matches_definition() {
        let x = Dense::from_rows(&[vec![1.5, -1.0, 0.0]]);
        let y = elu(&x);
        assert_eq!(y.get(0, 0), 1.5);
        assert!((y.get(0, 1) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert_eq!(y.get(0, 2), 0.0); // exp(0) - 1
    }
}
