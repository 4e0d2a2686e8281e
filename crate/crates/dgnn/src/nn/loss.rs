//! Sample-weighted softmax cross-entropy.

use crate::dense::Dense;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Weighted negative log-likelihood over the labeled rows:
/// `L = Σ_l w_l · (−ln softmax(logits_l)[y_l])`.
///
/// Returns the scalar loss and the gradient w.r.t. the full logits
/// matrix (rows outside `rows` are zero; row `l` is scaled by `w_l`).
pub fn weighted_softmax_ce<T: Scalar>(
    logits: &Dense<T>,
    rows: &[usize],
    labels: &[usize],
    weights: &[T],
) -> Result<(T, Dense<T>)> {
    if rows.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} labeled rows but {} weights",
            rows.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|&&w| w < T::zero()) {
        return Err(Error::Validation(format!("negative sample weight {w}")));
    }
    let classes = logits.cols();
    let mut grad = Dense::zeros(logits.rows(), logits.cols());
    let mut loss = T::zero();
    for (&row, &w) in rows.iter().zip(weights) {
        let y = labels[row];
        debug_assert!(y < classes);
        let r = logits.row(row);
        let max = r.iter().copied().fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for &v in r {
            denom = denom + (v - max).exp();
        }
        let log_denom = denom.ln();
        loss = loss + w * (log_denom - (r[y] - max));
        let g = grad.row_mut(row);
        for (j, &v) in r.iter().enumerate() {
            let p = (v - max).exp() / denom;
            let delta = if j == y { T::one() } else { T::zero() };
            g[j] = w * (p - delta);
        }
    }
    Ok((loss, grad))
}
