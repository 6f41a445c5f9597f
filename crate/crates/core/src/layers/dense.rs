use super::{glorot_uniform, missing_cache, Gradients, LayerCache, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fully connected linear map `z = x·Wᵀ + b`.
///
/// Inputs of any rank are viewed as `[batch, in]`. When `use_bias` is false
/// the bias is identically zero and is not exposed as a parameter, so no
/// update can move it.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Tensor,
    bias: Tensor,
    use_bias: bool,
}

impl DenseLayer {
    /// Builds a layer from `weights[out, in]` and `bias[out]`. A nonzero bias
    /// combined with `use_bias = false` is rejected.
    pub fn new(weights: Tensor, bias: Tensor, use_bias: bool) -> Result<Self> {
        let &[out, _] = weights.shape() else {
            return Err(Error::InvalidArgument(format!(
                "dense weights must be [out, in], got {:?}",
                weights.shape()
            )));
        };
        if bias.shape() != [out] {
            return Err(Error::shape("dense bias", bias.shape(), &[out]));
        }
        if !use_bias && bias.data().iter().any(|&b| b != 0.0) {
            return Err(Error::InvalidArgument(
                "use_bias is false but the stored bias is nonzero".into(),
            ));
        }
        if !weights.is_finite() || !bias.is_finite() {
            return Err(Error::InvalidArgument("dense parameters must be finite".into()));
        }
        Ok(DenseLayer {
            weights,
            bias,
            use_bias,
        })
    }

    pub fn without_bias(weights: Tensor) -> Result<Self> {
        let out = weights.shape()[0];
        DenseLayer::new(weights, Tensor::zeros(&[out]), false)
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(inputs: usize, outputs: usize, use_bias: bool, rng: &mut Rng) -> Self {
        Self::init_with_gain(inputs, outputs, use_bias, 1.0, rng)
    }

    /// Glorot-uniform weights scaled by `gain` (4 suits sigmoid units).
    pub fn init_with_gain(inputs: usize, outputs: usize, use_bias: bool, gain: f64, rng: &mut Rng) -> Self {
        DenseLayer {
            weights: glorot_uniform(&[outputs, inputs], inputs, outputs, gain, rng),
            bias: Tensor::zeros(&[outputs]),
            use_bias,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn params(&self) -> Vec<&Tensor> {
        if self.use_bias {
            vec![&self.weights, &self.bias]
        } else {
            vec![&self.weights]
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        if self.use_bias {
            vec![&mut self.weights, &mut self.bias]
        } else {
            vec![&mut self.weights]
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let batch = x.shape()[0];
        if x.len() != batch * self.inputs() {
            return Err(Error::shape("dense_forward", x.shape(), self.weights.shape()));
        }
        let x2 = x.clone().flatten_batch();
        let mut z = x2.matmul_transposed(&self.weights)?;
        if self.use_bias {
            let out = self.outputs();
            for row in z.data_mut().chunks_mut(out) {
                for (v, b) in row.iter_mut().zip(self.bias.data()) {
                    *v += b;
                }
            }
        }
        Ok(z)
    }

    pub fn forward_cached(&self, x: &Tensor, cache: &mut LayerCache) -> Result<Tensor> {
        let z = self.forward(x)?;
        *cache = LayerCache::Input(x.clone());
        Ok(z)
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &Tensor) -> Result<Gradients> {
        let LayerCache::Input(x) = cache else {
            return Err(missing_cache("dense"));
        };
        self.backward_from_input(x, upstream)
    }

    /// Backward pass given the forward input directly.
    pub(crate) fn backward_from_input(&self, x: &Tensor, upstream: &Tensor) -> Result<Gradients> {
        let batch = x.shape()[0];
        if upstream.shape() != [batch, self.outputs()] {
            return Err(Error::shape(
                "dense_backward",
                upstream.shape(),
                &[batch, self.outputs()],
            ));
        }
        let x2 = x.clone().flatten_batch();
        let grad_w = upstream.transposed_matmul(&x2)?;
        let grad_x = upstream.matmul(&self.weights)?.reshape(x.shape())?;
        let mut params = vec![grad_w];
        if self.use_bias {
            let out = self.outputs();
            let mut gb = vec![0.0; out];
            for row in upstream.data().chunks(out) {
                for (g, &u) in gb.iter_mut().zip(row) {
                    *g += u;
                }
            }
            params.push(Tensor::new(&[out], gb)?);
        }
        Ok(Gradients { input: grad_x, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let layer = DenseLayer::new(Tensor::identity(3), Tensor::zeros(&[3]), true).unwrap();
        let x = Tensor::from_rows(&[&[1.0, -2.0, 3.5], &[0.0, 4.0, -1.0]]);
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn hand_computed_case() {
        let w = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let layer = DenseLayer::new(w, Tensor::from_slice(&[0.5, -0.5]), true).unwrap();
        let z = layer.forward(&Tensor::from_rows(&[&[1.0, 1.0]])).unwrap();
        assert_eq!(z.data(), &[3.5, 6.5]);
    }

    #[test]
    fn biasless_layer_rejects_nonzero_bias() {
        let w = Tensor::identity(2);
        assert!(DenseLayer::new(w.clone(), Tensor::from_slice(&[0.1, 0.0]), false).is_err());
        let layer = DenseLayer::without_bias(w).unwrap();
        assert_eq!(layer.params().len(), 1);
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let layer = DenseLayer::without_bias(Tensor::identity(3)).unwrap();
        let err = layer.forward(&Tensor::zeros(&[2, 4])).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn backward_needs_cache() {
        let layer = DenseLayer::without_bias(Tensor::identity(2)).unwrap();
        assert!(matches!(
            layer.backward(&LayerCache::Empty, &Tensor::zeros(&[1, 2])),
            Err(Error::State(_))
        ));
    }
}
