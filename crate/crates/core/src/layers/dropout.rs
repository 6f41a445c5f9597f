use rand::{Rng as _, SeedableRng};

use super::{missing_cache, GateCache, Gradients, LayerCache, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Dropout with keep probability `p`.
///
/// Training passes keep each unit independently with probability `p` and
/// leave kept units unscaled. At inference no mask is drawn; the layer
/// multiplies by `p`, which is the same as scaling the next layer's weights
/// by `p` (see [`dropout_scale_for_inference`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    keep_prob: f64,
}

impl DropoutSpec {
    pub fn new(keep_prob: f64) -> Result<Self> {
        check_keep_prob(keep_prob)?;
        Ok(DropoutSpec { keep_prob })
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    /// Samples a mask and applies it. With `p == 1` nothing is drawn from
    /// `rng`, so such a layer leaves the generator stream untouched.
    pub fn forward_train(&self, x: &Tensor, rng: &mut Rng) -> (Tensor, Vec<bool>) {
        if self.keep_prob >= 1.0 {
            return (x.clone(), vec![true; x.len()]);
        }
        let mask: Vec<bool> = (0..x.len()).map(|_| rng.random::<f64>() < self.keep_prob).collect();
        let data = x
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &keep)| if keep { v } else { 0.0 })
            .collect();
        (Tensor::new(x.shape(), data).unwrap(), mask)
    }

    pub fn forward_infer(&self, x: &Tensor) -> Tensor {
        x.scale(self.keep_prob)
    }

    pub fn forward_cached(&self, x: &Tensor, rng: Option<&mut Rng>, cache: &mut LayerCache) -> Tensor {
        match rng {
            Some(rng) => {
                let (y, mask) = self.forward_train(x, rng);
                *cache = LayerCache::Gate(GateCache::Mask(mask));
                y
            }
            None => {
                *cache = LayerCache::Gate(GateCache::Scale(self.keep_prob));
                self.forward_infer(x)
            }
        }
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &Tensor) -> Result<Gradients> {
        let LayerCache::Gate(gate) = cache else {
            return Err(missing_cache("dropout"));
        };
        let input = match gate {
            GateCache::Mask(mask) => {
                if mask.len() != upstream.len() {
                    return Err(Error::InvalidArgument(
                        "dropout upstream does not match cached mask".into(),
                    ));
                }
                let data = upstream
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(&g, &keep)| if keep { g } else { 0.0 })
                    .collect();
                Tensor::new(upstream.shape(), data)?
            }
            GateCache::Scale(p) => upstream.scale(*p),
        };
        Ok(Gradients {
            input,
            params: Vec::new(),
        })
    }
}

fn check_keep_prob(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "keep probability must lie in (0, 1], got {p}"
        )))
    }
}

/// One training-mode dropout pass with a generator seeded from `seed`.
/// Returns the masked input and the keep mask as 0/1 values.
pub fn dropout_train_forward(spec: &DropoutSpec, x: &Tensor, seed: u64) -> (Tensor, Tensor) {
    let mut rng = Rng::seed_from_u64(seed);
    let (y, mask) = spec.forward_train(x, &mut rng);
    let mask = Tensor::new(x.shape(), mask.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect()).unwrap();
    (y, mask)
}

/// Inference-time weight scaling `W_test = p · W` for the weights leaving a
/// dropout layer.
pub fn dropout_scale_for_inference(weights: &Tensor, p: f64) -> Result<Tensor> {
    check_keep_prob(p)?;
    Ok(weights.scale(p))
}
