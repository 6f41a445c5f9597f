//! Convolutional maxout deep networks for frame-level phoneme
//! classification, built from scratch in double precision.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod features;
pub mod layers;
pub mod network;
pub mod pretrain;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
