//! Floating point abstraction shared by the network, optimizer and measure code.

use std::fmt;
use std::iter::Sum;

use num_traits::{FromPrimitive, NumAssignOps};

/// Real scalar used throughout the numeric core.
///
/// Implemented for `f32` and `f64`. Besides the usual arithmetic bounds it
/// carries a dense matrix product so the batched network kernels can dispatch
/// to the matching `matrixmultiply` routine.
pub trait Scalar:
    num_traits::Float
    + FromPrimitive
    + NumAssignOps
    + Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// `c = alpha * a * b + beta * c` with arbitrary row/column strides.
    ///
    /// # Safety
    /// The pointers and strides must describe valid `m x k`, `k x n` and
    /// `m x n` matrices; `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    /// Lossless widening used for serialization and reporting.
    fn to_f64_lossless(self) -> f64;

    fn from_f64_lossy(v: f64) -> Self;

    fn cast(v: f64) -> Self {
        Self::from_f64_lossy(v)
    }
}

impl Scalar for f64 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }

    fn to_f64_lossless(self) -> f64 {
        self
    }

    fn from_f64_lossy(v: f64) -> f64 {
        v
    }
}

impl Scalar for f32 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }

    fn to_f64_lossless(self) -> f64 {
        self as f64
    }

    fn from_f64_lossy(v: f64) -> f32 {
        v as f32
    }
}
