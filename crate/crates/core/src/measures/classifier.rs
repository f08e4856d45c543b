//! Softmax classifier used as an embedding and compared with `1 - L2`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{cross_entropy, GradientVector, LossTag, Network, Upstream};
use crate::scalar::Scalar;

#[inline]
pub(crate) fn l2_score<T: Scalar>(a: &[T], b: &[T]) -> T {
    let sq = a.iter().zip(b).fold(T::zero(), |acc, (&u, &w)| acc + (u - w) * (u - w));
    T::one() - sq.sqrt()
}

/// Mean cross-entropy of `g` over the rows of `x` against `targets`.
pub fn classification_loss<T: Scalar>(
    g: &Network<T>,
    x: &Matrix<T>,
    targets: &Matrix<T>,
) -> Result<(T, GradientVector<T>)> {
    if targets.rows() != x.rows() {
        return Err(Error::shape(x.rows(), targets.rows(), "class target rows"));
    }
    let mut grad = g.zero_gradient(LossTag::Classification);
    if x.rows() == 0 {
        return Ok((T::zero(), grad));
    }
    let inv_n = T::one() / T::cast(x.rows() as f64);
    let trace = g.forward_batch(x)?;
    let p = trace.output();
    let mut dl = Matrix::zeros(p.rows(), p.cols());
    let mut loss = T::zero();
    for i in 0..p.rows() {
        let (ce, gl) = cross_entropy(p.row(i), targets.row(i))?;
        loss += ce;
        for (v, g) in dl.row_mut(i).iter_mut().zip(gl) {
            *v = g * inv_n;
        }
    }
    g.backward_batch(&trace, &dl, Upstream::Logits, &mut grad)?;
    Ok((loss * inv_n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_unit_embeddings() {
        let s = l2_score(&[1.0, 0.0], &[0.0, 1.0]);
        assert!((s - (1.0 - 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(l2_score(&[0.3, 0.7], &[0.3, 0.7]), 1.0);
    }
}
