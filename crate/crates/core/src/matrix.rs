//! Minimal row-major matrix used by the batched network kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Weight blocks up to this many entries skip `gemm`; packing dominates
/// for the narrow layers of the tabular networks.
const SMALL_BLOCK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(rows * cols, data.len(), "matrix buffer"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(cols, r.len(), "matrix row"));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics, zero-width matrices yield empty rows instead
        let cols = self.cols.max(1);
        self.data
            .chunks_exact(cols)
            .take(if self.cols == 0 { 0 } else { self.rows })
    }

    /// New matrix made of the listed rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Resize in place, reusing the allocation. Contents are unspecified.
    pub(crate) fn reshape_for(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.data.resize(rows * cols, T::zero());
    }

    /// `out = self * w^T` where `w` is `(n, self.cols)` row-major.
    pub(crate) fn mul_transposed_into(&self, w: &[T], n: usize, out: &mut Matrix<T>) {
        debug_assert_eq!(w.len(), n * self.cols);
        out.reshape_for(self.rows, n);
        if self.rows == 0 || n == 0 {
            return;
        }
        let k = self.cols;
        if k == 0 {
            out.data.iter_mut().for_each(|v| *v = T::zero());
            return;
        }
        if k * n <= SMALL_BLOCK {
            for (a, o) in self.iter_rows().zip(out.data.chunks_exact_mut(n)) {
                for (v, wr) in o.iter_mut().zip(w.chunks_exact(k)) {
                    *v = a.iter().zip(wr).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
                }
            }
            return;
        }
        unsafe {
            T::gemm(
                self.rows,
                k,
                n,
                T::one(),
                self.data.as_ptr(),
                k as isize,
                1,
                w.as_ptr(),
                1,
                k as isize,
                T::zero(),
                out.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }

    /// `acc += self^T * a`, with `acc` a `(self.cols, a.cols)` row-major buffer.
    pub(crate) fn transposed_mul_acc(&self, a: &Matrix<T>, acc: &mut [T]) {
        debug_assert_eq!(self.rows, a.rows);
        debug_assert_eq!(acc.len(), self.cols * a.cols);
        if self.rows == 0 || acc.is_empty() {
            return;
        }
        if acc.len() <= SMALL_BLOCK {
            let n = a.cols;
            for (s, ar) in self.iter_rows().zip(a.iter_rows()) {
                for (&x, accr) in s.iter().zip(acc.chunks_exact_mut(n)) {
                    for (v, &y) in accr.iter_mut().zip(ar) {
                        *v += x * y;
                    }
                }
            }
            return;
        }
        unsafe {
            T::gemm(
                self.cols,
                self.rows,
                a.cols,
                T::one(),
                self.data.as_ptr(),
                1,
                self.cols as isize,
                a.data.as_ptr(),
                a.cols as isize,
                1,
                T::one(),
                acc.as_mut_ptr(),
                a.cols as isize,
                1,
            );
        }
    }

    /// `out = self * w` where `w` is `(self.cols, k)` row-major.
    pub(crate) fn mul_into(&self, w: &[T], k: usize, out: &mut Matrix<T>) {
        debug_assert_eq!(w.len(), self.cols * k);
        out.reshape_for(self.rows, k);
        if self.rows == 0 || k == 0 {
            return;
        }
        if self.cols == 0 {
            out.data.iter_mut().for_each(|v| *v = T::zero());
            return;
        }
        if self.cols * k <= SMALL_BLOCK {
            for (a, o) in self.iter_rows().zip(out.data.chunks_exact_mut(k)) {
                o.iter_mut().for_each(|v| *v = T::zero());
                for (&x, wr) in a.iter().zip(w.chunks_exact(k)) {
                    for (v, &y) in o.iter_mut().zip(wr) {
                        *v += x * y;
                    }
                }
            }
            return;
        }
        unsafe {
            T::gemm(
                self.rows,
                self.cols,
                k,
                T::one(),
                self.data.as_ptr(),
                self.cols as isize,
                1,
                w.as_ptr(),
                k as isize,
                1,
                T::zero(),
                out.data.as_mut_ptr(),
                k as isize,
                1,
            );
        }
    }
}
