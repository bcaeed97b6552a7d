//! Focal loss for multi-label training.
//!
//! Positive labels are weighted by `1 - alpha` and negatives by `alpha`; the
//! modulating factor `(1 - p)^gamma` (resp. `p^gamma`) shrinks the loss of
//! well-classified pairs. Both branches are non-negative.

use super::ModelError;
use crate::labels::BitGrid;
use crate::scalar::{sigmoid, softplus, Scalar};

/// Focal loss of a single probability.
pub fn focal_loss<T: Scalar>(p: T, positive: bool, alpha: T, gamma: T) -> Result<T, ModelError> {
    if !(p > T::zero() && p < T::one()) {
        return Err(ModelError::Domain(format!("probability {p} outside (0, 1)")));
    }
    let one = T::one();
    Ok(if positive {
        -(one - alpha) * (one - p).powf(gamma) * p.ln()
    } else {
        -alpha * p.powf(gamma) * (one - p).ln()
    })
}

/// Focal loss and its derivative with respect to the logit `z`, computed
/// from `z` directly so that saturated logits stay finite.
pub fn focal_from_logit<T: Scalar>(z: T, positive: bool, alpha: T, gamma: T) -> (T, T) {
    let one = T::one();
    let p = sigmoid(z);
    let q = sigmoid(-z);
    if positive {
        // log p = -softplus(-z)
        let log_p = -softplus(-z);
        let w = one - alpha;
        let qg = q.powf(gamma);
        let loss = -w * qg * log_p;
        let grad = w * (gamma * p * qg * log_p - qg * q);
        (loss, grad)
    } else {
        let log_q = -softplus(z);
        let pg = p.powf(gamma);
        let loss = -alpha * pg * log_q;
        let grad = alpha * (pg * p - gamma * pg * q * log_q);
        (loss, grad)
    }
}

/// Mean over the batch of the per-row sum of focal losses, plus the gradient
/// with respect to every logit.
pub fn loss_and_grad<T: Scalar>(
    logits: &[T],
    labels: &BitGrid,
    rows: &[usize],
    alpha: T,
    gamma: T,
) -> Result<(T, Vec<T>), ModelError> {
    let r = labels.cols();
    if logits.len() != rows.len() * r {
        return Err(ModelError::ShapeMismatch(format!(
            "{} logits for {} rows of {} labels",
            logits.len(),
            rows.len(),
            r
        )));
    }
    let inv_b = T::one() / T::from_f64_lossy(rows.len().max(1) as f64);
    let mut total = T::zero();
    let mut grad = vec![T::zero(); logits.len()];
    for (i, &row) in rows.iter().enumerate() {
        for j in 0..r {
            let (l, g) = focal_from_logit(logits[i * r + j], labels.get(row, j), alpha, gamma);
            total += l;
            grad[i * r + j] = g * inv_b;
        }
    }
    Ok((total * inv_b, grad))
}

/// Batch-mean focal loss over `[rows, n_rules]` logits, where `labels` has one row per logit row.
pub fn loss_total<T: Scalar>(logits: &[T], labels: &BitGrid, alpha: T, gamma: T) -> Result<T, ModelError> {
    let rows: Vec<usize> = (0..labels.rows()).collect();
    loss_and_grad(logits, labels, &rows, alpha, gamma).map(|(l, _)| l)
}

/// `p / (1 - p)` where `p` is the positive-label ratio of `labels`.
pub fn compute_alpha(labels: &BitGrid) -> Result<f64, ModelError> {
    let total = labels.rows() * labels.cols();
    if total == 0 {
        return Err(ModelError::DegenerateLabels);
    }
    alpha_from_ratio(labels.count_ones() as f64 / total as f64)
}

pub fn alpha_from_ratio(p_bar: f64) -> Result<f64, ModelError> {
    if !(p_bar > 0.0 && p_bar < 1.0) {
        return Err(ModelError::DegenerateLabels);
    }
    Ok(p_bar / (1.0 - p_bar))
}
