//! Shared embedding compared through the L1 energy `E = |G(x) - G(y)|_1`.

use crate::data::PairTriplet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{GradientVector, LossTag, Network, Upstream};
use crate::scalar::Scalar;

#[inline]
pub(crate) fn energy<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&u, &w)| acc + (u - w).abs())
}

/// Mean contrastive loss `s E^2/2 + (1-s) max(0, margin - E)^2 / 2` over `pairs`.
pub fn contrastive_loss<T: Scalar>(
    g: &Network<T>,
    x: &Matrix<T>,
    pairs: &[PairTriplet],
    margin: f64,
) -> Result<(T, GradientVector<T>)> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::Config(format!("contrastive margin must be positive, got {margin}")));
    }
    let mut grad = g.zero_gradient(LossTag::Contrastive);
    if pairs.is_empty() {
        return Ok((T::zero(), grad));
    }
    let margin = T::cast(margin);
    let half = T::cast(0.5);
    let inv_p = T::one() / T::cast(pairs.len() as f64);
    let trace = g.forward_batch(x)?;
    let e = trace.output();
    let mut de = Matrix::zeros(e.rows(), e.cols());
    let mut loss = T::zero();
    for p in pairs {
        let (a, b) = (e.row(p.x), e.row(p.y));
        let en = energy(a, b);
        let d_en = inv_p
            * if p.same {
                loss += half * en * en;
                en
            } else {
                let gap = (margin - en).max(T::zero());
                loss += half * gap * gap;
                -gap
            };
        if d_en == T::zero() {
            continue;
        }
        for j in 0..e.cols() {
            let diff = a[j] - b[j];
            let routed = if diff > T::zero() {
                d_en
            } else if diff < T::zero() {
                -d_en
            } else {
                T::zero()
            };
            de.row_mut(p.x)[j] += routed;
            de.row_mut(p.y)[j] -= routed;
        }
    }
    g.backward_batch(&trace, &de, Upstream::Output, &mut grad)?;
    Ok((loss * inv_p, grad))
}
