//! A single network over the concatenation `[x, y]`.
//!
//! The first layer splits as `W_a x + W_b y`, so its products are computed
//! once per row and only the later layers run per pair.

use crate::data::PairTriplet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{GradientVector, LossTag, Network, Upstream};
use crate::scalar::Scalar;

use super::esnn::output_or_logits;
use super::PAIR_CHUNK;

/// The two halves of the first-layer weights as contiguous `(h, m)` blocks.
fn split_first_layer<T: Scalar>(net: &Network<T>) -> (Vec<T>, Vec<T>) {
    let h = net.layout()[1];
    let m = net.input_width() / 2;
    let w = net.weights(0);
    let mut wa = Vec::with_capacity(h * m);
    let mut wb = Vec::with_capacity(h * m);
    for row in w.chunks_exact(2 * m) {
        wa.extend_from_slice(&row[..m]);
        wb.extend_from_slice(&row[m..]);
    }
    (wa, wb)
}

fn check_input<T: Scalar>(net: &Network<T>, width: usize) -> Result<()> {
    if net.input_width() != 2 * width {
        return Err(Error::shape(net.input_width(), 2 * width, "concatenated pair width"));
    }
    if net.layer_count() < 2 {
        return Err(Error::InvalidLayout("gabel needs at least one hidden layer".into()));
    }
    Ok(())
}

fn first_layer_batch<T: Scalar>(
    net: &Network<T>,
    pa: &Matrix<T>,
    pb: &Matrix<T>,
    pairs: impl Iterator<Item = (usize, usize)>,
    rows: usize,
) -> Matrix<T> {
    let h = pa.cols();
    let bias = net.biases(0);
    let mut z = Matrix::zeros(rows, h);
    for (row, (i, j)) in z.as_mut_slice().chunks_exact_mut(h).zip(pairs) {
        for (((v, &a), &b), &c) in row.iter_mut().zip(pa.row(i)).zip(pb.row(j)).zip(bias) {
            *v = a + b + c;
        }
    }
    net.activate(0, &mut z);
    z
}

/// Mean absolute error `|s - net([x, y])|` over `pairs`, with its gradient.
pub fn gabel_loss<T: Scalar>(
    net: &Network<T>,
    x: &Matrix<T>,
    pairs: &[PairTriplet],
) -> Result<(T, GradientVector<T>)> {
    check_input(net, x.cols())?;
    let mut grad = net.zero_gradient(LossTag::Similarity);
    if pairs.is_empty() {
        return Ok((T::zero(), grad));
    }
    let (m, h) = (x.cols(), net.layout()[1]);
    let (wa, wb) = split_first_layer(net);
    let mut pa = Matrix::zeros(0, 0);
    let mut pb = Matrix::zeros(0, 0);
    x.mul_transposed_into(&wa, h, &mut pa);
    x.mul_transposed_into(&wb, h, &mut pb);
    let inv_p = T::one() / T::cast(pairs.len() as f64);
    let mut dpa = Matrix::zeros(x.rows(), h);
    let mut dpb = Matrix::zeros(x.rows(), h);
    let mut db = vec![T::zero(); h];
    let mut loss = T::zero();
    let layers = 1..net.layer_count();
    for chunk in pairs.chunks(PAIR_CHUNK) {
        let h1 = first_layer_batch(net, &pa, &pb, chunk.iter().map(|p| (p.x, p.y)), chunk.len());
        let trace = net.forward_layers(layers.clone(), h1)?;
        let mut up = Matrix::zeros(chunk.len(), 1);
        for ((u, &out), p) in up.as_mut_slice().iter_mut().zip(trace.output().as_slice()).zip(chunk) {
            let s = if p.same { T::one() } else { T::zero() };
            loss += (out - s).abs();
            *u = if out > s {
                inv_p
            } else if out < s {
                -inv_p
            } else {
                T::zero()
            };
        }
        let mut dz = net.backward_batch(&trace, &up, Upstream::Output, &mut grad)?;
        net.activation_backprop(0, trace.input(), &mut dz);
        for (row, p) in dz.iter_rows().zip(chunk) {
            for (k, &d) in row.iter().enumerate() {
                dpa.row_mut(p.x)[k] += d;
                dpb.row_mut(p.y)[k] += d;
                db[k] += d;
            }
        }
    }
    let mut ga = vec![T::zero(); h * m];
    let mut gb = vec![T::zero(); h * m];
    dpa.transposed_mul_acc(x, &mut ga);
    dpb.transposed_mul_acc(x, &mut gb);
    let w_range = net.weight_range(0);
    let gw = &mut grad.values[w_range];
    for (o, row) in gw.chunks_exact_mut(2 * m).enumerate() {
        row[..m].copy_from_slice(&ga[o * m..(o + 1) * m]);
        row[m..].copy_from_slice(&gb[o * m..(o + 1) * m]);
    }
    grad.values[net.bias_range(0)].copy_from_slice(&db);
    Ok((loss * inv_p, grad))
}

/// `net([a, b])` for every row `a` of `left` against every row `b` of `right`,
/// or the pre-sigmoid output when `logits` is set.
pub(crate) fn score_block<T: Scalar>(
    net: &Network<T>,
    left: &Matrix<T>,
    right: &Matrix<T>,
    logits: bool,
) -> Result<Matrix<T>> {
    check_input(net, left.cols())?;
    if right.cols() != left.cols() {
        return Err(Error::shape(left.cols(), right.cols(), "reference width"));
    }
    let h = net.layout()[1];
    let (wa, wb) = split_first_layer(net);
    let mut pa = Matrix::zeros(0, 0);
    let mut pb = Matrix::zeros(0, 0);
    left.mul_transposed_into(&wa, h, &mut pa);
    right.mul_transposed_into(&wb, h, &mut pb);
    let mut out = Matrix::zeros(left.rows(), right.rows());
    let r = right.rows();
    if r == 0 {
        return Ok(out);
    }
    let per_chunk = (PAIR_CHUNK / r).max(1);
    let layers = 1..net.layer_count();
    let mut start = 0;
    while start < left.rows() {
        let end = (start + per_chunk).min(left.rows());
        let pairs = (start..end).flat_map(|i| (0..r).map(move |j| (i, j)));
        let h1 = first_layer_batch(net, &pa, &pb, pairs, (end - start) * r);
        let scores = output_or_logits(net.forward_layers(layers.clone(), h1)?, logits);
        out.as_mut_slice()[start * r..end * r].copy_from_slice(scores.as_slice());
        start = end;
    }
    Ok(out)
}
