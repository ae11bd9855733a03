use super::{shape_err, NnError};
use crate::Real;

/// Mean binary cross-entropy evaluated directly on logits.
///
/// Uses `max(z, 0) - z·y + ln(1 + e^{-|z|})`, which stays finite for any
/// finite logit. Returns the loss and its gradient with respect to each
/// logit, `(σ(z) - y) / N`.
pub fn bce_with_logits<T: Real>(logits: &[T], targets: &[T]) -> Result<(T, Vec<T>), NnError> {
    if logits.len() != targets.len() {
        return Err(shape_err("bce_loss", logits.len(), targets.len()));
    }
    if logits.is_empty() {
        return Err(NnError::Argument {
            op: "bce_loss",
            reason: "no samples".into(),
        });
    }
    let n = T::lit(logits.len() as f64);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(targets) {
        total += z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p();
        grad.push((super::sigmoid(z) - y) / n);
    }
    Ok((total / n, grad))
}
