//! Layer kinds with exact forward and backward passes.
//!
//! Layers never own activation caches. A forward call fills a caller-owned
//! [`LayerCache`] and the matching backward call reads it back, so a single
//! layer instance can serve any number of concurrent passes.

mod activation;
mod conv;
mod dense;
mod dropout;
mod loss;
mod maxout;
mod pool;

pub use activation::ActivationKind;
pub use conv::{ConvLayer, ShareAxis};
pub use dense::DenseLayer;
pub use dropout::{dropout_scale_for_inference, dropout_train_forward, DropoutSpec};
pub use loss::softmax_xent;
pub use maxout::{ChannelMaxout, MaxoutBlock};
pub use pool::MaxPoolLayer;

use crate::tensor::Tensor;

/// Deterministic generator used for initialization, shuffling and masks.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Forward-pass mode. Training passes draw dropout masks from the supplied
/// generator; inference passes never sample.
pub enum Mode<'a> {
    Train(&'a mut Rng),
    Infer,
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Per-pass state recorded by a forward call for use by backward.
#[derive(Debug, Clone, Default)]
pub enum LayerCache {
    #[default]
    Empty,
    /// The layer input (dense, conv, activations).
    Input(Tensor),
    /// Input plus the in-group argmax chosen by a maxout unit.
    Maxout { input: Tensor, argmax: Vec<usize> },
    /// Input shape plus the flat input index selected for every output.
    Routed {
        input_shape: Vec<usize>,
        sources: Vec<usize>,
    },
    /// Multiplicative gate applied elementwise (dropout).
    Gate(GateCache),
}

#[derive(Debug, Clone)]
pub enum GateCache {
    Mask(Vec<bool>),
    Scale(f64),
}

/// Gradients produced by one backward call. `params` follows the order of
/// the layer's `params()`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub input: Tensor,
    pub params: Vec<Tensor>,
}

pub(crate) fn missing_cache(layer: &str) -> crate::Error {
    crate::Error::State(format!("{layer} backward called without a matching forward pass"))
}

/// Uniform(-a, a) initializer with `a = gain * sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, gain: f64, rng: &mut Rng) -> Tensor {
    use rand::Rng as _;
    let a = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.random_range(-a..a))
}
