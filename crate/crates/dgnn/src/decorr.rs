//! Sample-reweighting variable decorrelation.
//!
//! Given labeled-node embeddings `H` (n×p) and sample weights `w`, the
//! weighted pair moment of dimensions j and k is
//!
//! ```text
//! M_jk = Σ_i w_i H_ij H_ik / n − (Σ_i w_i H_ij / n)(Σ_i w_i H_ik / n)
//! ```
//!
//! The VD loss sums squared off-diagonal moments; the DVD loss weights
//! each row's absolute moments by per-dimension importances α before
//! squaring, and adds two penalties: `(λ1/n)·Σ w_i²` (weight variance)
//! and `λ2·(mean(w) − 1)²` (keeps weights away from zero). Weights are
//! parameterized as `w = ω ⊙ ω` so they stay nonnegative, and ω is
//! optimized by gradient descent with step halving on non-descent steps.

use crate::dense::Dense;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Nonnegative per-sample weights, parameterized by their square root.
#[derive(Debug, Clone)]
pub struct SampleWeights<T> {
    omega: Vec<T>,
}

impl<T: Scalar> SampleWeights<T> {
    pub fn ones(n: usize) -> Self {
        SampleWeights {
            omega: vec![T::one(); n],
        }
    }

    pub fn from_omega(omega: Vec<T>) -> Self {
        SampleWeights { omega }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    /// The weights `w = ω ⊙ ω`.
    pub fn w(&self) -> Vec<T> {
        self.omega.iter().map(|&o| o * o).collect()
    }
}

/// Per-dimension importance weights; entries must be nonnegative.
#[derive(Debug, Clone)]
pub struct VariableWeights<T> {
    pub alpha: Vec<T>,
}

impl<T: Scalar> VariableWeights<T> {
    /// Rescale to mean one. Degenerate all-zero α is left unchanged.
    pub fn normalized_mean_one(&self) -> VariableWeights<T> {
        let mean = self.alpha.iter().copied().sum::<T>()
            / T::from_f64_lossy(self.alpha.len().max(1) as f64);
        if mean > T::zero() {
            VariableWeights {
                alpha: self.alpha.iter().map(|&a| a / mean).collect(),
            }
        } else {
            self.clone()
        }
    }
}

/// Inner-optimizer configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DecorrConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Initial gradient-descent step size for ω.
    pub lr: f64,
    /// Gradient steps per invocation.
    pub inner_iters: usize,
}

impl Default for DecorrConfig {
    fn default() -> Self {
        DecorrConfig {
            lambda1: 0.1,
            lambda2: 1.0,
            lr: 0.01,
            inner_iters: 50,
        }
    }
}

/// Which decorrelation objective the inner optimizer minimizes.
#[derive(Clone, Copy, Debug)]
pub enum DecorrObjective<'a, T> {
    /// Equal treatment of all dimension pairs.
    Vd,
    /// Per-dimension importance weights α.
    Dvd { alpha: &'a [T] },
}

/// Result of a sample-weight optimization run.
#[derive(Debug, Clone)]
pub struct WeightFit<T> {
    pub weights: SampleWeights<T>,
    /// Accepted gradient steps.
    pub iters: usize,
    /// True if the run stopped on the improvement threshold rather than
    /// the iteration budget.
    pub converged: bool,
    /// Objective value after each accepted step, starting with the
    /// initial value.
    pub loss_history: Vec<T>,
}

fn check_lengths<T: Scalar>(h: &Dense<T>, w: &[T]) -> Result<()> {
    if h.rows() != w.len() {
        return Err(Error::Shape(format!(
            "{} embedding rows but {} weights",
            h.rows(),
            w.len()
        )));
    }
    Ok(())
}

fn check_alpha<T: Scalar>(alpha: &[T], p: usize) -> Result<()> {
    if alpha.len() != p {
        return Err(Error::Shape(format!(
            "alpha has {} entries for {} dimensions",
            alpha.len(),
            p
        )));
    }
    if let Some(a) = alpha.iter().find(|&&a| a < T::zero()) {
        return Err(Error::Validation(format!("negative variable weight {a}")));
    }
    Ok(())
}

/// Raw moments: `M` (p×p) and the weighted column means `b` (p).
fn moments<T: Scalar>(h: &Dense<T>, w: &[T]) -> (Dense<T>, Vec<T>) {
    let n = h.rows();
    let p = h.cols();
    let inv_n = T::one() / T::from_f64_lossy(n as f64);
    let mut b = vec![T::zero(); p];
    let mut a = Dense::zeros(p, p);
    for i in 0..n {
        let row = h.row(i);
        let wi = w[i];
        for j in 0..p {
            let wh = wi * row[j];
            b[j] = b[j] + wh;
            let a_row = a.row_mut(j);
            for k in 0..p {
                a_row[k] = a_row[k] + wh * row[k];
            }
        }
    }
    for j in 0..p {
        b[j] = b[j] * inv_n;
    }
    let mut m = a;
    for j in 0..p {
        let m_row = m.row_mut(j);
        for k in 0..p {
            m_row[k] = m_row[k] * inv_n - b[j] * b[k];
        }
    }
    (m, b)
}

/// Weighted pairwise moment matrix `M`. Symmetric; the diagonal is
/// computed but ignored by the losses.
pub fn weighted_pair_moments<T: Scalar>(h: &Dense<T>, w: &[T]) -> Result<Dense<T>> {
    check_lengths(h, w)?;
    Ok(moments(h, w).0)
}

/// VD loss: `Σ_{j≠k} M_jk²`.
pub fn vd_loss<T: Scalar>(h: &Dense<T>, w: &[T]) -> Result<T> {
    let m = weighted_pair_moments(h, w)?;
    let p = m.rows();
    let mut loss = T::zero();
    for j in 0..p {
        for k in 0..p {
            if j != k {
                loss = loss + m.get(j, k) * m.get(j, k);
            }
        }
    }
    Ok(loss)
}

/// DVD loss: `Σ_j (Σ_{k≠j} α_k |M_jk|)² + (λ1/n)·Σ w_i² + λ2·(mean(w)−1)²`.
pub fn dvd_loss<T: Scalar>(
    h: &Dense<T>,
    w: &[T],
    alpha: &[T],
    cfg: &DecorrConfig,
) -> Result<T> {
    check_lengths(h, w)?;
    check_alpha(alpha, h.cols())?;
    let m = moments(h, w).0;
    let p = m.rows();
    let mut loss = T::zero();
    for j in 0..p {
        let mut s = T::zero();
        for k in 0..p {
            if j != k {
                s = s + alpha[k] * m.get(j, k).abs();
            }
        }
        loss = loss + s * s;
    }
    Ok(loss + penalties(w, cfg))
}

fn penalties<T: Scalar>(w: &[T], cfg: &DecorrConfig) -> T {
    let n = T::from_f64_lossy(w.len() as f64);
    let l1 = T::from_f64_lossy(cfg.lambda1);
    let l2 = T::from_f64_lossy(cfg.lambda2);
    let sum_sq: T = w.iter().map(|&x| x * x).sum();
    let mean: T = w.iter().copied().sum::<T>() / n;
    l1 / n * sum_sq + l2 * (mean - T::one()) * (mean - T::one())
}

/// Variable weights from the last-layer transform: the population
/// variance of each row of the `p×C` classifier matrix.
pub fn variable_weights<T: Scalar>(w_last: &Dense<T>) -> VariableWeights<T> {
    let c = T::from_f64_lossy(w_last.cols() as f64);
    let alpha = (0..w_last.rows())
        .map(|j| {
            let row = w_last.row(j);
            let mean: T = row.iter().copied().sum::<T>() / c;
            row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / c
        })
        .collect();
    VariableWeights { alpha }
}

/// Frobenius diagnostic: sum of squared off-diagonal entries of the
/// w-weighted covariance matrix of `h`'s columns (weights normalized by
/// their sum, so uniform rescaling of `w` leaves the value unchanged).
pub fn cross_covariance_frobenius<T: Scalar>(h: &Dense<T>, w: &[T]) -> Result<T> {
    check_lengths(h, w)?;
    let total: T = w.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::Validation(
            "cross-covariance needs a positive total weight".into(),
        ));
    }
    let p = h.cols();
    let inv = T::one() / total;
    let mut mu = vec![T::zero(); p];
    for i in 0..h.rows() {
        let row = h.row(i);
        for j in 0..p {
            mu[j] = mu[j] + w[i] * row[j];
        }
    }
    for m in mu.iter_mut() {
        *m = *m * inv;
    }
    let mut cov = Dense::<T>::zeros(p, p);
    for i in 0..h.rows() {
        let row = h.row(i);
        for j in 0..p {
            let dj = row[j] - mu[j];
            let cov_row = cov.row_mut(j);
            for k in 0..p {
                cov_row[k] = cov_row[k] + w[i] * dj * (row[k] - mu[k]);
            }
        }
    }
    let mut out = T::zero();
    for j in 0..p {
        for k in 0..p {
            if j != k {
                let c = cov.get(j, k) * inv;
                out = out + c * c;
            }
        }
    }
    Ok(out)
}

/// Objective value and gradient w.r.t. ω at the current iterate.
fn loss_and_grad<T: Scalar>(
    h: &Dense<T>,
    omega: &[T],
    objective: DecorrObjective<'_, T>,
    cfg: &DecorrConfig,
) -> (T, Vec<T>) {
    let n = h.rows();
    let p = h.cols();
    let n_t = T::from_f64_lossy(n as f64);
    let w: Vec<T> = omega.iter().map(|&o| o * o).collect();
    let (m, b) = moments(h, &w);

    // Decorrelation value and its coefficient matrix D with
    // D_jk = ∂L_decorr/∂M_jk (zero diagonal).
    let mut d = Dense::zeros(p, p);
    let mut decorr = T::zero();
    match objective {
        DecorrObjective::Vd => {
            for j in 0..p {
                for k in 0..p {
                    if j != k {
                        let mjk = m.get(j, k);
                        decorr = decorr + mjk * mjk;
                        d.set(j, k, (T::one() + T::one()) * mjk);
                    }
                }
            }
        }
        DecorrObjective::Dvd { alpha } => {
            for j in 0..p {
                let mut s = T::zero();
                for k in 0..p {
                    if j != k {
                        s = s + alpha[k] * m.get(j, k).abs();
                    }
                }
                decorr = decorr + s * s;
                for k in 0..p {
                    if j != k {
                        let sign = match m.get(j, k) {
                            v if v > T::zero() => T::one(),
                            v if v < T::zero() => -T::one(),
                            _ => T::zero(), // subgradient choice at |0|
                        };
                        d.set(j, k, (T::one() + T::one()) * s * alpha[k] * sign);
                    }
                }
            }
        }
    }

    // ∂M_jk/∂w_i = (H_ij H_ik − H_ij b_k − b_j H_ik)/n, so
    // ∂L/∂w_i = (h_i D h_iᵀ − h_i·(D b) − h_i·(Dᵀ b)) / n.
    let hd = h.matmul(&d).expect("shape checked");
    let mut db = vec![T::zero(); p];
    let mut dtb = vec![T::zero(); p];
    for j in 0..p {
        for k in 0..p {
            db[j] = db[j] + d.get(j, k) * b[k];
            dtb[j] = dtb[j] + d.get(k, j) * b[k];
        }
    }
    let w_sum: T = w.iter().copied().sum();
    let mean_gap = w_sum / n_t - T::one();
    let l1 = T::from_f64_lossy(cfg.lambda1);
    let l2 = T::from_f64_lossy(cfg.lambda2);
    let two = T::one() + T::one();
    let mut grad = vec![T::zero(); n];
    for i in 0..n {
        let row = h.row(i);
        let hd_row = hd.row(i);
        let mut quad = T::zero();
        let mut lin = T::zero();
        for j in 0..p {
            quad = quad + hd_row[j] * row[j];
            lin = lin + row[j] * (db[j] + dtb[j]);
        }
        let dw = (quad - lin) / n_t + two * l1 * w[i] / n_t + two * l2 * mean_gap / n_t;
        grad[i] = dw * two * omega[i];
    }
    let loss = decorr + penalties(&w, cfg);
    (loss, grad)
}

/// Objective value only (used by the line search).
fn loss_value<T: Scalar>(
    h: &Dense<T>,
    omega: &[T],
    objective: DecorrObjective<'_, T>,
    cfg: &DecorrConfig,
) -> T {
    let w: Vec<T> = omega.iter().map(|&o| o * o).collect();
    let m = moments(h, &w).0;
    let p = h.cols();
    let mut decorr = T::zero();
    match objective {
        DecorrObjective::Vd => {
            for j in 0..p {
                for k in 0..p {
                    if j != k {
                        decorr = decorr + m.get(j, k) * m.get(j, k);
                    }
                }
            }
        }
        DecorrObjective::Dvd { alpha } => {
            for j in 0..p {
                let mut s = T::zero();
                for k in 0..p {
                    if j != k {
                        s = s + alpha[k] * m.get(j, k).abs();
                    }
                }
                decorr = decorr + s * s;
            }
        }
    }
    decorr + penalties(&w, cfg)
}

/// Improvement threshold for early stopping.
const IMPROVEMENT_TOL: f64 = 1e-9;

/// Minimize the chosen decorrelation objective over ω by gradient
/// descent, starting from `omega_init`. A step that fails to descend is
/// retried with a halved step size; the loss never increases across the
/// run. Stops early once an accepted step improves the objective by
/// less than 1e-9.
pub fn optimize_sample_weights<T: Scalar>(
    h: &Dense<T>,
    objective: DecorrObjective<'_, T>,
    cfg: &DecorrConfig,
    omega_init: SampleWeights<T>,
) -> Result<WeightFit<T>> {
    optimize_with_tol(h, objective, cfg, omega_init, IMPROVEMENT_TOL)
}

/// Same descent loop with a caller-chosen improvement threshold; the
/// uniqueness probe uses a much tighter one than the training default.
pub(crate) fn optimize_with_tol<T: Scalar>(
    h: &Dense<T>,
    objective: DecorrObjective<'_, T>,
    cfg: &DecorrConfig,
    omega_init: SampleWeights<T>,
    improvement_tol: f64,
) -> Result<WeightFit<T>> {
    check_lengths(h, &omega_init.w())?;
    if let DecorrObjective::Dvd { alpha } = objective {
        check_alpha(alpha, h.cols())?;
    }
    let tol = T::from_f64_lossy(improvement_tol);
    let max_step = T::from_f64_lossy(cfg.lr * 100.0);
    let mut omega = omega_init.omega().to_vec();
    let (mut loss, mut grad) = loss_and_grad(h, &omega, objective, cfg);
    if !loss.is_finite() {
        return Err(Error::NonFinite { iter: 0 });
    }
    let mut history = vec![loss];
    let mut step = T::from_f64_lossy(cfg.lr);
    let mut iters = 0;
    let mut converged = false;
    while iters < cfg.inner_iters {
        let mut accepted = false;
        let mut candidate = vec![T::zero(); omega.len()];
        for _ in 0..40 {
            for (c, (&o, &g)) in candidate.iter_mut().zip(omega.iter().zip(&grad)) {
                *c = o - step * g;
            }
            let new_loss = loss_value(h, &candidate, objective, cfg);
            if !new_loss.is_finite() {
                return Err(Error::NonFinite { iter: iters + 1 });
            }
            if new_loss <= loss {
                let improvement = loss - new_loss;
                omega.copy_from_slice(&candidate);
                loss = new_loss;
                history.push(loss);
                iters += 1;
                accepted = true;
                if improvement < tol {
                    converged = true;
                }
                break;
            }
            step = step / (T::one() + T::one());
        }
        if !accepted || converged {
            converged = true;
            break;
        }
        let (_, g) = loss_and_grad(h, &omega, objective, cfg);
        grad = g;
        step = (step + step / (T::one() + T::one())).min(max_step); // grow 1.5x
    }
    Ok(WeightFit {
        weights: SampleWeights::from_omega(omega),
        iters,
        converged,
        loss_history: history,
    })
}
