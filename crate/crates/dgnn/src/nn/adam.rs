//! Adam with decoupled L2 weight decay.

use serde::{Deserialize, Serialize};

use crate::dense::Dense;
use crate::nn::ParamTensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled L2 coefficient applied directly to the parameters.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First/second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Dense<T>>,
    v: Vec<Dense<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new() -> Self {
        AdamState {
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    /// Current step count.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Crack open the moment buffers (test support).
    pub fn moments_mut(&mut self) -> (&mut Vec<Dense<T>>, &mut Vec<Dense<T>>) {
        (&mut self.m, &mut self.v)
    }
}

impl<T: Scalar> Default for AdamState<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// One Adam update over the given parameters, reading their `grad`
/// fields. Moment buffers are allocated lazily on the first call.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut ParamTensor<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) {
    if state.m.is_empty() {
        for p in params.iter() {
            state
                .m
                .push(Dense::zeros(p.value.rows(), p.value.cols()));
            state
                .v
                .push(Dense::zeros(p.value.rows(), p.value.cols()));
        }
    }
    assert_eq!(state.m.len(), params.len(), "optimizer/parameter mismatch");
    state.t += 1;
    let t = state.t as i32;
    let lr = T::from_f64_lossy(cfg.lr);
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let eps = T::from_f64_lossy(cfg.eps);
    let wd = T::from_f64_lossy(cfg.weight_decay);
    let bc1 = T::one() - b1.powi(t);
    let bc2 = T::one() - b2.powi(t);

    for (k, p) in params.iter_mut().enumerate() {
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        let g = p.grad.data();
        let x = p.value.data_mut();
        for i in 0..x.len() {
            m[i] = b1 * m[i] + (T::one() - b1) * g[i];
            v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            x[i] = x[i] - lr * (m_hat / (v_hat.sqrt() + eps) + wd * x[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::Dense;

    #[test]
    fn zero_gradient_zero_decay_is_fixed_point() {
        let mut p = ParamTensor::new(Dense::from_rows(&[vec![1.0, -2.0]]));
        let mut state = AdamState::new();
        let cfg = AdamConfig::default();
        adam_step(&mut [&mut p], &mut state, &cfg);
        assert_eq!(p.value.row(0), &[1.0, -2.0]);
    }

    #[test]
    fn single_scalar_step_matches_hand_computation() {
        // Start from a known moment state and verify one update by hand.
        let mut p = ParamTensor::new(Dense::from_rows(&[vec![0.5]]));
        p.grad.set(0, 0, 0.2);
        let mut state = AdamState::new();
        adam_step(
            &mut [&mut p],
            &mut state,
            &AdamConfig {
                lr: 0.0,
                ..AdamConfig::default()
            },
        ); // allocate moments, t = 1, value unchanged (lr = 0)
        {
            let (m, v) = state.moments_mut();
            m[0].set(0, 0, 0.1);
            v[0].set(0, 0, 0.04);
        }
        p.grad.set(0, 0, 0.5);
        let cfg = AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.1,
        };
        adam_step(&mut [&mut p], &mut state, &cfg);

        // hand computation at t = 2
        let m = 0.9 * 0.1 + 0.1 * 0.5;
        let v = 0.999 * 0.04 + 0.001 * 0.25;
        let m_hat = m / (1.0 - 0.9f64.powi(2));
        let v_hat = v / (1.0 - 0.999f64.powi(2));
        let expected = 0.5 - 0.01 * (m_hat / (v_hat.sqrt() + 1e-8) + 0.1 * 0.5);
        assert!((p.value.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_shrinks_parameters_without_gradient() {
        let mut p = ParamTensor::new(Dense::<f64>::from_rows(&[vec![1.0]]));
        let mut state = AdamState::new();
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 5e-4,
            ..AdamConfig::default()
        };
        adam_step(&mut [&mut p], &mut state, &cfg);
        assert!((p.value.get(0, 0) - (1.0 - 0.1 * 5e-4)).abs() < 1e-15);
    }
}
