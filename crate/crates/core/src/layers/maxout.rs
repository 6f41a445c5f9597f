use super::{missing_cache, DenseLayer, Gradients, LayerCache, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A fully connected layer followed by a max over consecutive groups of `k`
/// linear units: `h_i = max_j z_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxoutBlock {
    linear: DenseLayer,
    k: usize,
}

impl MaxoutBlock {
    pub fn new(linear: DenseLayer, k: usize) -> Result<Self> {
        if k == 0 || !linear.outputs().is_multiple_of(k) {
            return Err(Error::InvalidArgument(format!(
                "maxout linear width {} is not divisible by group size {k}",
                linear.outputs()
            )));
        }
        Ok(MaxoutBlock { linear, k })
    }

    pub fn init(inputs: usize, units: usize, k: usize, rng: &mut Rng) -> Self {
        MaxoutBlock {
            linear: DenseLayer::init(inputs, units * k, true, rng),
            k,
        }
    }

    pub fn group_size(&self) -> usize {
        self.k
    }

    pub fn units(&self) -> usize {
        self.linear.outputs() / self.k
    }

    pub fn linear(&self) -> &DenseLayer {
        &self.linear
    }

    pub fn linear_mut(&mut self) -> &mut DenseLayer {
        &mut self.linear
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cache = LayerCache::Empty;
        self.forward_cached(x, &mut cache)
    }

    pub fn forward_cached(&self, x: &Tensor, cache: &mut LayerCache) -> Result<Tensor> {
        let z = self.linear.forward(x)?;
        let (h, argmax) = z.argmax_over_groups(self.k)?;
        *cache = LayerCache::Maxout {
            input: x.clone(),
            argmax,
        };
        Ok(h)
    }

    /// Gradient with respect to the linear pre-activations: each group's
    /// upstream value goes to its argmax unit, every other unit gets zero.
    pub fn route_upstream(&self, cache: &LayerCache, upstream: &Tensor) -> Result<Tensor> {
        let LayerCache::Maxout { input, argmax } = cache else {
            return Err(missing_cache("maxout"));
        };
        let batch = input.shape()[0];
        if upstream.shape() != [batch, self.units()] {
            return Err(Error::shape(
                "maxout_backward",
                upstream.shape(),
                &[batch, self.units()],
            ));
        }
        let mut pre = vec![0.0; batch * self.linear.outputs()];
        for (g, (&u, &j)) in upstream.data().iter().zip(argmax).enumerate() {
            pre[g * self.k + j] = u;
        }
        Tensor::new(&[batch, self.linear.outputs()], pre)
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &Tensor) -> Result<Gradients> {
        let pre = self.route_upstream(cache, upstream)?;
        let LayerCache::Maxout { input, .. } = cache else {
            unreachable!()
        };
        self.linear.backward_from_input(input, &pre)
    }
}

/// Maxout across feature maps: `[b, c·k, f, t] -> [b, c, f, t]`, each output
/// map taking the elementwise max of `k` consecutive input maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelMaxout {
    k: usize,
}

impl ChannelMaxout {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("channel maxout group size must be >= 1".into()));
        }
        Ok(ChannelMaxout { k })
    }

    pub fn group_size(&self) -> usize {
        self.k
    }

    pub fn forward_cached(&self, x: &Tensor, cache: &mut LayerCache) -> Result<Tensor> {
        let &[b, c, f, t] = x.shape() else {
            return Err(Error::InvalidArgument(format!(
                "channel maxout expects [batch, channels, freq, time], got {:?}",
                x.shape()
            )));
        };
        if c % self.k != 0 {
            return Err(Error::InvalidArgument(format!(
                "{c} channels not divisible by group size {}",
                self.k
            )));
        }
        let plane = f * t;
        let out_c = c / self.k;
        let data = x.data();
        let mut out = Vec::with_capacity(b * out_c * plane);
        let mut sources = Vec::with_capacity(b * out_c * plane);
        for s in 0..b {
            for oc in 0..out_c {
                let base = (s * c + oc * self.k) * plane;
                for p in 0..plane {
                    let mut best = base + p;
                    for j in 1..self.k {
                        let idx = base + j * plane + p;
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                    out.push(data[best]);
                    sources.push(best);
                }
            }
        }
        *cache = LayerCache::Routed {
            input_shape: x.shape().to_vec(),
            sources,
        };
        Tensor::new(&[b, out_c, f, t], out)
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &Tensor) -> Result<Gradients> {
        route_back(cache, upstream, "channel maxout")
    }
}

/// Scatters `upstream` to the recorded source positions.
pub(super) fn route_back(cache: &LayerCache, upstream: &Tensor, name: &str) -> Result<Gradients> {
    let LayerCache::Routed { input_shape, sources } = cache else {
        return Err(missing_cache(name));
    };
    if upstream.len() != sources.len() {
        return Err(Error::InvalidArgument(format!(
            "{name} upstream has {} elements, forward produced {}",
            upstream.len(),
            sources.len()
        )));
    }
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&u, &src) in upstream.data().iter().zip(sources) {
        g[src] += u;
    }
    Ok(Gradients {
        input: grad,
        params: Vec::new(),
    })
}
