use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Activation;
use crate::scalar::Scalar;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

static NEXT_NETWORK_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed)
}

/// Number of trainable parameters: sum over layers of `(n_in + 1) * n_out`.
pub fn parameter_count(layout: &[usize]) -> usize {
    layout.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

#[derive(Debug, Clone, Copy)]
struct LayerShape {
    n_in: usize,
    n_out: usize,
    activation: Activation,
    offset: usize,
}

impl LayerShape {
    fn weights(&self) -> Range<usize> {
        self.offset..self.offset + self.n_in * self.n_out
    }

    fn biases(&self) -> Range<usize> {
        let start = self.offset + self.n_in * self.n_out;
        start..start + self.n_out
    }
}

/// Layered dense network `layout[0] -> ... -> layout[last]`.
#[derive(Debug)]
pub struct Network<T> {
    layout: Vec<usize>,
    activations: Vec<Activation>,
    seed: u64,
    params: Vec<T>,
    shapes: Vec<LayerShape>,
    id: u64,
    revision: u64,
}

impl<T: Scalar> Clone for Network<T> {
    fn clone(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            activations: self.activations.clone(),
            seed: self.seed,
            params: self.params.clone(),
            shapes: self.shapes.clone(),
            id: next_id(),
            revision: 0,
        }
    }
}

impl<T: Scalar> PartialEq for Network<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout
            && self.activations == other.activations
            && self.seed == other.seed
            && self.params == other.params
    }
}

fn validate(layout: &[usize], activations: &[Activation]) -> Result<Vec<LayerShape>> {
    if layout.len() < 2 {
        return Err(Error::InvalidLayout(format!(
            "need at least an input and an output width, got {layout:?}"
        )));
    }
    if layout.contains(&0) {
        return Err(Error::InvalidLayout(format!(
            "layer widths must be positive, got {layout:?}"
        )));
    }
    if activations.len() != layout.len() - 1 {
        return Err(Error::InvalidLayout(format!(
            "{} layers need {} activations, got {}",
            layout.len() - 1,
            layout.len() - 1,
            activations.len()
        )));
    }
    if let Some(pos) = activations[..activations.len() - 1]
        .iter()
        .position(|a| *a == Activation::Softmax)
    {
        return Err(Error::InvalidLayout(format!(
            "softmax is only allowed on the output layer, found on layer {pos}"
        )));
    }
    let mut offset = 0;
    Ok(layout
        .windows(2)
        .zip(activations)
        .map(|(w, &activation)| {
            let shape = LayerShape {
                n_in: w[0],
                n_out: w[1],
                activation,
                offset,
            };
            offset += (w[0] + 1) * w[1];
            shape
        })
        .collect())
}

/// Builds a network with Glorot-uniform weights and zero biases.
///
/// Weights of each layer are drawn from `U(-r, r)`, `r = sqrt(6 / (n_in + n_out))`,
/// in parameter order from a ChaCha8 stream seeded with `seed`. Samples are
/// drawn in `f64` and rounded, so `f32` and `f64` networks share a scheme.
pub fn init_network<T: Scalar>(
    layout: &[usize],
    activations: &[Activation],
    seed: u64,
) -> Result<Network<T>> {
    let shapes = validate(layout, activations)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![T::zero(); parameter_count(layout)];
    for shape in &shapes {
        let limit = (6.0 / (shape.n_in + shape.n_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite range");
        for p in &mut params[shape.weights()] {
            *p = T::cast(dist.sample(&mut rng));
        }
    }
    Ok(Network {
        layout: layout.to_vec(),
        activations: activations.to_vec(),
        seed,
        params,
        shapes,
        id: next_id(),
        revision: 0,
    })
}

/// `grad *= sigmoid'(z)`, evaluated as `e^-|z| / (1 + e^-|z|)^2` so it stays
/// positive where the sigmoid itself rounds to 0 or 1.
fn sigmoid_backprop<T: Scalar>(z: &[T], grad: &mut [T]) {
    for (g, &z) in grad.iter_mut().zip(z) {
        let e = (-z.abs()).exp();
        let d = T::one() + e;
        *g *= e / (d * d);
    }
}

/// Which quantity an upstream gradient is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upstream {
    /// The network output, after the final activation.
    Output,
    /// The pre-activation of the final layer (e.g. softmax logits).
    Logits,
}

/// Post-activation values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    network: u64,
    revision: u64,
    layers: Range<usize>,
    /// `values[0]` is the input to the first layer of `layers`,
    /// `values[k + 1]` the output of layer `layers.start + k`.
    values: Vec<Matrix<T>>,
    /// Pre-activation of a sigmoid output layer, whose derivative cannot be
    /// recovered from a saturated output.
    logits: Option<Matrix<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.values.last().expect("trace has at least one matrix")
    }

    pub fn into_output(mut self) -> Matrix<T> {
        self.values.pop().expect("trace has at least one matrix")
    }

    pub fn input(&self) -> &Matrix<T> {
        &self.values[0]
    }

    /// Recovers the input buffer for reuse.
    pub fn into_input(mut self) -> Matrix<T> {
        self.values.swap_remove(0)
    }

    /// Output of layer `layer` (absolute index).
    pub fn layer_output(&self, layer: usize) -> &Matrix<T> {
        &self.values[layer + 1 - self.layers.start]
    }

    /// Pre-activation of the output layer, kept when it is a sigmoid.
    pub fn logits(&self) -> Option<&Matrix<T>> {
        self.logits.as_ref()
    }

    pub fn rows(&self) -> usize {
        self.values[0].rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossTag {
    /// Absolute error between predicted and true similarity.
    Similarity,
    /// Categorical cross entropy against class targets.
    Classification,
    /// Pairwise contrastive loss on embedding distances.
    Contrastive,
    /// Weighted sum of similarity and classification terms.
    Combined,
    /// Supplied directly by the caller.
    External,
}

/// Flat gradient aligned with a network's parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector<T> {
    pub values: Vec<T>,
    pub tag: LossTag,
}

impl<T: Scalar> GradientVector<T> {
    pub fn zeros(len: usize, tag: LossTag) -> Self {
        Self {
            values: vec![T::zero(); len],
            tag,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn add_assign(&mut self, other: &GradientVector<T>) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::shape(self.len(), other.len(), "gradient accumulation"));
        }
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = T::zero());
    }
}

impl<T: Scalar> Network<T> {
    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_width(&self) -> usize {
        self.layout[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layout.last().expect("validated layout")
    }

    pub fn layer_count(&self) -> usize {
        self.shapes.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn parameters(&self) -> &[T] {
        &self.params
    }

    /// Mutable parameter access. Invalidates every outstanding [`Trace`].
    pub fn parameters_mut(&mut self) -> &mut [T] {
        self.revision += 1;
        &mut self.params
    }

    pub fn weights(&self, layer: usize) -> &[T] {
        &self.params[self.shapes[layer].weights()]
    }

    pub fn biases(&self, layer: usize) -> &[T] {
        &self.params[self.shapes[layer].biases()]
    }

    /// Range of `layer`'s weights inside the flat parameter vector.
    pub fn weight_range(&self, layer: usize) -> Range<usize> {
        self.shapes[layer].weights()
    }

    pub fn bias_range(&self, layer: usize) -> Range<usize> {
        self.shapes[layer].biases()
    }

    pub fn zero_gradient(&self, tag: LossTag) -> GradientVector<T> {
        GradientVector::zeros(self.params.len(), tag)
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, Trace<T>)> {
        let input = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let trace = self.forward_batch(&input)?;
        Ok((trace.output().row(0).to_vec(), trace))
    }

    /// Forward pass over a batch of row vectors.
    pub fn forward_batch(&self, input: &Matrix<T>) -> Result<Trace<T>> {
        self.forward_layers(0..self.shapes.len(), input.clone())
    }

    /// Network output for every row, without keeping intermediates.
    pub fn predict_batch(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.forward_batch(input)?.into_output())
    }

    /// Runs only `layers`, starting from `input` (the output of the previous
    /// layer, or the pre-activation when the caller applies it).
    pub fn forward_layers(&self, layers: Range<usize>, input: Matrix<T>) -> Result<Trace<T>> {
        if layers.start >= layers.end || layers.end > self.shapes.len() {
            return Err(Error::InvalidLayout(format!(
                "layer range {layers:?} outside 0..{}",
                self.shapes.len()
            )));
        }
        let n_in = self.shapes[layers.start].n_in;
        if input.cols() != n_in {
            return Err(Error::shape(n_in, input.cols(), "network input width"));
        }
        let mut values = Vec::with_capacity(layers.len() + 1);
        let mut logits = None;
        values.push(input);
        for l in layers.clone() {
            let shape = self.shapes[l];
            let mut out = Matrix::zeros(0, 0);
            values
                .last()
                .expect("non-empty")
                .mul_transposed_into(&self.params[shape.weights()], shape.n_out, &mut out);
            let bias = &self.params[shape.biases()];
            for row in out.as_mut_slice().chunks_exact_mut(shape.n_out) {
                for (v, &b) in row.iter_mut().zip(bias) {
                    *v += b;
                }
            }
            if l + 1 == layers.end && shape.activation == Activation::Sigmoid {
                logits = Some(out.clone());
            }
            shape.activation.apply(out.as_mut_slice(), shape.n_out);
            values.push(out);
        }
        Ok(Trace {
            network: self.id,
            revision: self.revision,
            layers,
            values,
            logits,
        })
    }

    /// Applies layer `layer`'s activation to a pre-activation buffer.
    pub fn activate(&self, layer: usize, values: &mut Matrix<T>) {
        let shape = self.shapes[layer];
        shape.activation.apply(values.as_mut_slice(), shape.n_out);
    }

    /// Turns a gradient w.r.t. layer `layer`'s output into one w.r.t. its
    /// pre-activation, given that output.
    pub fn activation_backprop(&self, layer: usize, output: &Matrix<T>, grad: &mut Matrix<T>) {
        let shape = self.shapes[layer];
        shape
            .activation
            .backprop(output.as_slice(), grad.as_mut_slice(), shape.n_out);
    }

    /// Reverse pass for a batch: accumulates parameter gradients into `grad`
    /// (summed over rows) and returns the gradient w.r.t. the trace input.
    pub fn backward_batch(
        &self,
        trace: &Trace<T>,
        upstream: &Matrix<T>,
        at: Upstream,
        grad: &mut GradientVector<T>,
    ) -> Result<Matrix<T>> {
        if trace.network != self.id || trace.revision != self.revision {
            return Err(Error::Cache(
                "trace was produced by another network or before a parameter update".into(),
            ));
        }
        if grad.len() != self.params.len() {
            return Err(Error::shape(self.params.len(), grad.len(), "gradient length"));
        }
        let last = trace.layers.end - 1;
        let out = trace.output();
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(Error::shape(
                out.rows() * out.cols(),
                upstream.rows() * upstream.cols(),
                "upstream gradient",
            ));
        }
        let mut delta = upstream.clone();
        if at == Upstream::Output {
            match &trace.logits {
                Some(z) => sigmoid_backprop(z.as_slice(), delta.as_mut_slice()),
                None => self.activation_backprop(last, out, &mut delta),
            }
        }
        let mut d_input = Matrix::zeros(0, 0);
        for l in trace.layers.clone().rev() {
            let shape = self.shapes[l];
            let a_in = &trace.values[l - trace.layers.start];
            delta.transposed_mul_acc(a_in, &mut grad.values[shape.weights()]);
            let gb = &mut grad.values[shape.biases()];
            for row in delta.as_slice().chunks_exact(shape.n_out) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            delta.mul_into(&self.params[shape.weights()], shape.n_in, &mut d_input);
            if l > trace.layers.start {
                self.activation_backprop(l - 1, a_in, &mut d_input);
                std::mem::swap(&mut delta, &mut d_input);
            }
        }
        Ok(d_input)
    }

    /// Single-sample reverse pass; see [`Network::backward_batch`].
    pub fn backward(
        &self,
        trace: &Trace<T>,
        upstream: &[T],
        at: Upstream,
        grad: &mut GradientVector<T>,
    ) -> Result<Vec<T>> {
        let up = Matrix::from_vec(1, upstream.len(), upstream.to_vec())?;
        Ok(self.backward_batch(trace, &up, at, grad)?.into_vec())
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            format_version: NETWORK_FORMAT_VERSION,
            layout: self.layout.clone(),
            activations: self.activations.clone(),
            seed: self.seed,
            parameters: self.params.iter().map(|p| p.to_f64_lossless()).collect(),
        }
    }

    pub fn from_document(doc: &NetworkDocument) -> Result<Self> {
        if doc.format_version != NETWORK_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported network format version {}",
                doc.format_version
            )));
        }
        let shapes = validate(&doc.layout, &doc.activations)?;
        let expected = parameter_count(&doc.layout);
        if doc.parameters.len() != expected {
            return Err(Error::shape(
                expected,
                doc.parameters.len(),
                "serialized parameters",
            ));
        }
        Ok(Network {
            layout: doc.layout.clone(),
            activations: doc.activations.clone(),
            seed: doc.seed,
            params: doc.parameters.iter().map(|&p| T::from_f64_lossy(p)).collect(),
            shapes,
            id: next_id(),
            revision: 0,
        })
    }
}

/// Versioned JSON form of a network.
///
/// `parameters` follows the flat order described in the module docs. Values
/// are written with shortest round-trip formatting, so `f64` round trips are
/// exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub format_version: u32,
    pub layout: Vec<usize>,
    pub activations: Vec<Activation>,
    pub seed: u64,
    pub parameters: Vec<f64>,
}
