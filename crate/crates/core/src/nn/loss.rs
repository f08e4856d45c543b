use crate::error::{Error, Result};
use crate::nn::activation::softmax_in_place;
use crate::scalar::Scalar;

/// Probabilities are clamped to `[CE_PROBABILITY_FLOOR, 1]` before the log.
pub const CE_PROBABILITY_FLOOR: f64 = 1e-12;

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Categorical cross entropy `-sum t_i ln p_i` between a softmax output `p`
/// and a target distribution `t`.
///
/// Returns the loss and its gradient w.r.t. the logits that produced `p`,
/// which is `p * sum(t) - t` (`p - t` for one-hot targets). Clamping only
/// affects the value, never the gradient.
pub fn cross_entropy<T: Scalar>(p: &[T], t: &[T]) -> Result<(T, Vec<T>)> {
    if p.len() != t.len() {
        return Err(Error::shape(p.len(), t.len(), "cross entropy target"));
    }
    let floor = T::cast(CE_PROBABILITY_FLOOR);
    let mut loss = T::zero();
    let mut mass = T::zero();
    for (&pi, &ti) in p.iter().zip(t) {
        if ti != T::zero() {
            loss -= ti * pi.max(floor).min(T::one()).ln();
        }
        mass += ti;
    }
    let grad = p.iter().zip(t).map(|(&pi, &ti)| pi * mass - ti).collect();
    Ok((loss, grad))
}

/// `|s - pred|` with subgradient `sign(pred - s)`, taken as 0 at `pred == s`.
pub fn absolute_error<T: Scalar>(pred: T, s: T) -> (T, T) {
    let diff = pred - s;
    let sub = if diff > T::zero() {
        T::one()
    } else if diff < T::zero() {
        -T::one()
    } else {
        T::zero()
    };
    (diff.abs(), sub)
}
