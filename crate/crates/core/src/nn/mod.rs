//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Parameters of a [`Network`] live in one flat buffer. Layer `l` stores its
//! weights as a row-major `(n_out, n_in)` matrix followed by its `n_out` biases,
//! and layers follow each other in order. [`GradientVector`] uses the same
//! ordering so optimizers can treat both as plain slices.

mod activation;
mod loss;
mod network;

pub use activation::Activation;
pub use loss::{absolute_error, cross_entropy, softmax, CE_PROBABILITY_FLOOR};
pub use network::{
    init_network, parameter_count, GradientVector, LossTag, Network, NetworkDocument, Trace,
    Upstream, NETWORK_FORMAT_VERSION,
};
