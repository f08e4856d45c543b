use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Linear,
}

impl Activation {
    /// Applies the activation in place to every row of width `width`.
    pub(crate) fn apply<T: Scalar>(self, values: &mut [T], width: usize) {
        match self {
            Activation::Relu => values.iter_mut().for_each(|v| {
                if *v < T::zero() {
                    *v = T::zero();
                }
            }),
            Activation::Sigmoid => values.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Linear => {}
            Activation::Softmax => {
                for row in values.chunks_exact_mut(width) {
                    softmax_in_place(row);
                }
            }
        }
    }

    /// Turns `grad` (w.r.t. the activation output `out`) into the gradient
    /// w.r.t. the pre-activation, in place.
    pub(crate) fn backprop<T: Scalar>(self, out: &[T], grad: &mut [T], width: usize) {
        match self {
            Activation::Relu => {
                for (g, &y) in grad.iter_mut().zip(out) {
                    if y <= T::zero() {
                        *g = T::zero();
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &y) in grad.iter_mut().zip(out) {
                    *g *= y * (T::one() - y);
                }
            }
            Activation::Linear => {}
            Activation::Softmax => {
                for (g, y) in grad.chunks_exact_mut(width).zip(out.chunks_exact(width)) {
                    let dot: T = g.iter().zip(y).map(|(&a, &b)| a * b).sum();
                    for (gi, &yi) in g.iter_mut().zip(y) {
                        *gi = yi * (*gi - dot);
                    }
                }
            }
        }
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}
