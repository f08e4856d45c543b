//! Shared embedding `G` followed by a learned combiner `C` over `|G(x) - G(y)|`.

use crate::data::PairTriplet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{cross_entropy, GradientVector, LossTag, Network, Trace, Upstream};
use crate::scalar::Scalar;

use super::PAIR_CHUNK;

/// Loss value and gradients for both networks.
#[derive(Debug, Clone)]
pub struct EsnnGradient<T> {
    pub loss: T,
    pub g: GradientVector<T>,
    pub c: GradientVector<T>,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

fn check_networks<T: Scalar>(g: &Network<T>, c: &Network<T>) -> Result<()> {
    if c.input_width() != g.output_width() {
        return Err(Error::shape(g.output_width(), c.input_width(), "combiner input width"));
    }
    if c.output_width() != 1 {
        return Err(Error::shape(1, c.output_width(), "combiner output width"));
    }
    Ok(())
}

#[inline]
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Mean over `pairs` of `(1-a)/2 (Lc(x) + Lc(y)) + a |s - C(|G(x) - G(y)|)|`.
///
/// `x` holds one row per sample and `targets` the matching class
/// distributions; pair indices refer to rows of `x`.
pub fn esnn_loss<T: Scalar>(
    g: &Network<T>,
    c: &Network<T>,
    alpha: f64,
    x: &Matrix<T>,
    targets: &Matrix<T>,
    pairs: &[PairTriplet],
) -> Result<EsnnGradient<T>> {
    check_alpha(alpha)?;
    check_networks(g, c)?;
    if targets.rows() != x.rows() || targets.cols() != g.output_width() {
        return Err(Error::shape(
            x.rows() * g.output_width(),
            targets.rows() * targets.cols(),
            "class targets",
        ));
    }
    let mut grad_g = g.zero_gradient(LossTag::Combined);
    let mut grad_c = c.zero_gradient(LossTag::Combined);
    if pairs.is_empty() {
        return Ok(EsnnGradient {
            loss: T::zero(),
            g: grad_g,
            c: grad_c,
        });
    }
    let n = x.rows();
    if let Some(p) = pairs.iter().find(|p| p.x >= n || p.y >= n) {
        return Err(Error::shape(n, p.x.max(p.y) + 1, "pair index"));
    }
    let a = T::cast(alpha);
    let inv_p = T::one() / T::cast(pairs.len() as f64);
    let trace_g = g.forward_batch(x)?;
    let e = trace_g.output();
    let k = e.cols();
    let mut de = Matrix::zeros(n, k);
    let mut loss_s = T::zero();
    let c_layers = 0..c.layer_count();
    let mut d = Matrix::zeros(0, k);
    let mut up = Matrix::zeros(0, 1);
    for chunk in pairs.chunks(PAIR_CHUNK) {
        d.reshape_for(chunk.len(), k);
        for (row, p) in d.as_mut_slice().chunks_exact_mut(k).zip(chunk) {
            for ((v, &u), &w) in row.iter_mut().zip(e.row(p.x)).zip(e.row(p.y)) {
                *v = (u - w).abs();
            }
        }
        let trace_c = c.forward_layers(c_layers.clone(), std::mem::replace(&mut d, Matrix::zeros(0, k)))?;
        up.reshape_for(chunk.len(), 1);
        for ((u, &out), p) in up.as_mut_slice().iter_mut().zip(trace_c.output().as_slice()).zip(chunk) {
            let s = if p.same { T::one() } else { T::zero() };
            loss_s += (out - s).abs();
            *u = a * inv_p * sign(out - s);
        }
        if alpha > 0.0 {
            let dd = c.backward_batch(&trace_c, &up, Upstream::Output, &mut grad_c)?;
            for (row, p) in dd.iter_rows().zip(chunk) {
                for (j, &gd) in row.iter().enumerate() {
                    let diff = e.row(p.x)[j] - e.row(p.y)[j];
                    let routed = gd * sign(diff);
                    de.row_mut(p.x)[j] += routed;
                    de.row_mut(p.y)[j] -= routed;
                }
            }
        }
        d = trace_c.into_input();
    }
    let last = g.layer_count() - 1;
    g.activation_backprop(last, e, &mut de);
    let mut counts = vec![0usize; n];
    for p in pairs {
        counts[p.x] += 1;
        counts[p.y] += 1;
    }
    let half = (T::one() - a) / T::cast(2.0);
    let mut loss_c = T::zero();
    for (i, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let (ce, gl) = cross_entropy(e.row(i), targets.row(i))?;
        let w = half * T::cast(count as f64) * inv_p;
        loss_c += w * ce;
        for (v, g) in de.row_mut(i).iter_mut().zip(gl) {
            *v += w * g;
        }
    }
    g.backward_batch(&trace_g, &de, Upstream::Logits, &mut grad_g)?;
    Ok(EsnnGradient {
        loss: loss_c + a * loss_s * inv_p,
        g: grad_g,
        c: grad_c,
    })
}

/// Single-pair form of [`esnn_loss`].
#[allow(clippy::too_many_arguments)]
pub fn esnn_pair_loss<T: Scalar>(
    g: &Network<T>,
    c: &Network<T>,
    alpha: f64,
    x: &[T],
    y: &[T],
    same: bool,
    t_x: &[T],
    t_y: &[T],
) -> Result<EsnnGradient<T>> {
    let inputs = Matrix::from_rows(&[x, y])?;
    let targets = Matrix::from_rows(&[t_x, t_y])?;
    esnn_loss(g, c, alpha, &inputs, &targets, &[PairTriplet { x: 0, y: 1, same }])
}

pub(crate) fn output_or_logits<T: Scalar>(trace: Trace<T>, logits: bool) -> Matrix<T> {
    match trace.logits() {
        Some(z) if logits => z.clone(),
        _ => trace.into_output(),
    }
}

/// `C(|a - b|)` for every row `a` of `left` against every row `b` of `right`,
/// or the pre-sigmoid output of `C` when `logits` is set.
pub(crate) fn score_embeddings<T: Scalar>(
    c: &Network<T>,
    left: &Matrix<T>,
    right: &Matrix<T>,
    logits: bool,
) -> Result<Matrix<T>> {
    let k = left.cols();
    let mut out = Matrix::zeros(left.rows(), right.rows());
    if right.rows() == 0 {
        return Ok(out);
    }
    let per_chunk = (PAIR_CHUNK / right.rows()).max(1);
    let layers = 0..c.layer_count();
    for (block, rows) in (0..left.rows()).collect::<Vec<_>>().chunks(per_chunk).enumerate() {
        let mut d = Matrix::zeros(rows.len() * right.rows(), k);
        let mut slots = d.as_mut_slice().chunks_exact_mut(k);
        for &i in rows {
            let a = left.row(i);
            for b in right.iter_rows() {
                let slot = slots.next().expect("sized above");
                for ((v, &u), &w) in slot.iter_mut().zip(a).zip(b) {
                    *v = (u - w).abs();
                }
            }
        }
        let scores = output_or_logits(c.forward_layers(layers.clone(), d)?, logits);
        let start = block * per_chunk * right.rows();
        out.as_mut_slice()[start..start + scores.rows()].copy_from_slice(scores.as_slice());
    }
    Ok(out)
}
