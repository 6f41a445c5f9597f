use super::maxout::route_back;
use super::{Gradients, LayerCache};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Max pooling over the frequency and time axes of `[batch, c, f, t]`.
/// First maximal element wins ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPoolLayer {
    pool: (usize, usize),
    stride: (usize, usize),
}

impl MaxPoolLayer {
    /// Pool of `(freq, time)` extent with stride equal to the extent.
    pub fn new(pool_f: usize, pool_t: usize) -> Result<Self> {
        MaxPoolLayer::with_stride((pool_f, pool_t), (pool_f, pool_t))
    }

    pub fn with_stride(pool: (usize, usize), stride: (usize, usize)) -> Result<Self> {
        if pool.0 == 0 || pool.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(Error::InvalidArgument("pool sizes and strides must be positive".into()));
        }
        Ok(MaxPoolLayer { pool, stride })
    }

    pub fn pool(&self) -> (usize, usize) {
        self.pool
    }

    pub fn stride(&self) -> (usize, usize) {
        self.stride
    }

    /// `floor((extent - pool) / stride) + 1` per pooled axis.
    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let &[c, f, t] = input else {
            return Err(Error::InvalidArgument(format!(
                "pool input must be [channels, freq, time], got {input:?}"
            )));
        };
        if self.pool.0 > f || self.pool.1 > t {
            return Err(Error::InvalidArgument(format!(
                "pool {:?} exceeds input extent ({f}, {t})",
                self.pool
            )));
        }
        Ok([
            c,
            (f - self.pool.0) / self.stride.0 + 1,
            (t - self.pool.1) / self.stride.1 + 1,
        ])
    }

    pub fn forward_cached(&self, x: &Tensor, cache: &mut LayerCache) -> Result<Tensor> {
        if x.rank() != 4 {
            return Err(Error::InvalidArgument(format!(
                "pool expects [batch, channels, freq, time], got {:?}",
                x.shape()
            )));
        }
        let b = x.shape()[0];
        let (f, t) = (x.shape()[2], x.shape()[3]);
        let [c, of, ot] = self.output_shape(&x.shape()[1..])?;
        let data = x.data();
        let mut out = Vec::with_capacity(b * c * of * ot);
        let mut sources = Vec::with_capacity(out.capacity());
        for plane in 0..b * c {
            let base = plane * f * t;
            for i in 0..of {
                for j in 0..ot {
                    let (r0, c0) = (i * self.stride.0, j * self.stride.1);
                    let mut best = base + r0 * t + c0;
                    for r in r0..r0 + self.pool.0 {
                        for col in c0..c0 + self.pool.1 {
                            let idx = base + r * t + col;
                            if data[idx] > data[best] {
                                best = idx;
                            }
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
        Tensor::new(&[b, c, of, ot], out)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_cached(x, &mut LayerCache::Empty)
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &Tensor) -> Result<Gradients> {
        route_back(cache, upstream, "maxpool")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Rng;
    use rand::{Rng as _, SeedableRng};

    fn row(v: &[f64]) -> Tensor {
        Tensor::new(&[1, 1, 1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn pool_one_is_identity_both_ways() {
        let pool = MaxPoolLayer::new(1, 1).unwrap();
        let x = row(&[1.0, -4.0, 2.0]);
        let mut cache = LayerCache::Empty;
        assert_eq!(pool.forward_cached(&x, &mut cache).unwrap(), x);
        let up = row(&[0.3, 0.2, 0.1]);
        assert_eq!(pool.backward(&cache, &up).unwrap().input, up);
    }

    #[test]
    fn forced_pool_two() {
        let pool = MaxPoolLayer::new(1, 2).unwrap();
        let mut cache = LayerCache::Empty;
        let y = pool.forward_cached(&row(&[1.0, 4.0, 2.0, 3.0]), &mut cache).unwrap();
        assert_eq!(y.data(), &[4.0, 3.0]);
        let g = pool.backward(&cache, &row(&[1.0, 1.0])).unwrap();
        assert_eq!(g.input.data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn ties_go_to_first() {
        let pool = MaxPoolLayer::new(1, 3).unwrap();
        let mut cache = LayerCache::Empty;
        pool.forward_cached(&row(&[2.0, 2.0, 2.0]), &mut cache).unwrap();
        let g = pool.backward(&cache, &row(&[1.0])).unwrap();
        assert_eq!(g.input.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn oversized_pool_rejected() {
        let pool = MaxPoolLayer::new(2, 2).unwrap();
        assert!(pool.forward(&Tensor::zeros(&[1, 1, 1, 4])).is_err());
    }

    #[test]
    fn matches_exhaustive_window_oracle() {
        let mut rng = Rng::seed_from_u64(2);
        for &(pf, pt, sf, st) in &[(2, 2, 2, 2), (3, 1, 3, 1), (2, 3, 1, 2), (1, 2, 1, 2)] {
            let pool = MaxPoolLayer::with_stride((pf, pt), (sf, st)).unwrap();
            let (c, f, t) = (2, 7, 8);
            let x = Tensor::from_fn(&[2, c, f, t], |_| rng.random_range(-1.0..1.0));
            let y = pool.forward(&x).unwrap();
            let [_, of, ot] = pool.output_shape(&[c, f, t]).unwrap();
            assert_eq!(of, (f - pf) / sf + 1);
            assert_eq!(ot, (t - pt) / st + 1);
            for plane in 0..2 * c {
                for i in 0..of {
                    for j in 0..ot {
                        let mut m = f64::NEG_INFINITY;
                        for r in i * sf..i * sf + pf {
                            for col in j * st..j * st + pt {
                                m = m.max(x.data()[plane * f * t + r * t + col]);
                            }
                        }
                        assert_eq!(y.data()[(plane * of + i) * ot + j], m);
                    }
                }
            }
        }
    }
}
