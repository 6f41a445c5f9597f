use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{glorot_uniform, missing_cache, Gradients, LayerCache, Rng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Which axes of the `[channels, frequency, time]` input a kernel slides
/// along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShareAxis {
    Time,
    Frequency,
    Both,
}

impl fmt::Display for ShareAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShareAxis::Time => "T",
            ShareAxis::Frequency => "F",
            ShareAxis::Both => "TF",
        })
    }
}

impl FromStr for ShareAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "T" | "TIME" => Ok(ShareAxis::Time),
            "F" | "FREQ" | "FREQUENCY" => Ok(ShareAxis::Frequency),
            "TF" | "FT" | "T&F" | "F&T" | "BOTH" => Ok(ShareAxis::Both),
            _ => Err(Error::InvalidArgument(format!("unknown sharing axis {s:?}"))),
        }
    }
}

/// Valid-mode (unpadded, unit-stride) 2-D cross-correlation.
///
/// Input layout is `[batch, in_channels, freq, time]`; kernels are
/// `[out_channels, in_channels, kh, kw]` with `kh` along frequency and `kw`
/// along time. Time-only sharing requires `kh == 1`, frequency-only
/// requires `kw == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    kernels: Tensor,
    axis: ShareAxis,
}

impl ConvLayer {
    pub fn new(kernels: Tensor, axis: ShareAxis) -> Result<Self> {
        let &[_, _, kh, kw] = kernels.shape() else {
            return Err(Error::InvalidArgument(format!(
                "conv kernels must be [out, in, kh, kw], got {:?}",
                kernels.shape()
            )));
        };
        match axis {
            ShareAxis::Time if kh != 1 => {
                return Err(Error::InvalidArgument(format!(
                    "time-only sharing needs kh == 1, got {kh}"
                )))
            }
            ShareAxis::Frequency if kw != 1 => {
                return Err(Error::InvalidArgument(format!(
                    "frequency-only sharing needs kw == 1, got {kw}"
                )))
            }
            _ => {}
        }
        Ok(ConvLayer { kernels, axis })
    }

    pub fn init(
        in_channels: usize,
        out_channels: usize,
        kh: usize,
        kw: usize,
        axis: ShareAxis,
        rng: &mut Rng,
    ) -> Result<Self> {
        let fan_in = in_channels * kh * kw;
        let fan_out = out_channels * kh * kw;
        let kernels = glorot_uniform(&[out_channels, in_channels, kh, kw], fan_in, fan_out, 1.0, rng);
        ConvLayer::new(kernels, axis)
    }

    pub fn axis(&self) -> ShareAxis {
        self.axis
    }

    pub fn kernels(&self) -> &Tensor {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut Tensor {
        &mut self.kernels
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_extent(&self) -> (usize, usize) {
        (self.kernels.shape()[2], self.kernels.shape()[3])
    }

    /// Output `[channels, freq, time]` for an input of `[channels, freq, time]`.
    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let &[c, f, t] = input else {
            return Err(Error::InvalidArgument(format!(
                "conv input must be [channels, freq, time], got {input:?}"
            )));
        };
        let (kh, kw) = self.kernel_extent();
        if c != self.in_channels() || kh > f || kw > t {
            return Err(Error::shape("conv_forward", input, &self.kernels.shape()[1..]));
        }
        Ok([self.out_channels(), f - kh + 1, t - kw + 1])
    }

    fn kernel_matrix(&self) -> Tensor {
        let oc = self.out_channels();
        self.kernels.clone().reshape(&[oc, self.kernels.len() / oc]).unwrap()
    }

    /// Unfolds one sample into `[out_positions, in_channels·kh·kw]`.
    fn im2col(&self, sample: &[f64], f: usize, t: usize) -> Tensor {
        let (kh, kw) = self.kernel_extent();
        let c = self.in_channels();
        let (of, ot) = (f - kh + 1, t - kw + 1);
        let width = c * kh * kw;
        let mut cols = vec![0.0; of * ot * width];
        for i in 0..of {
            for j in 0..ot {
                let row = &mut cols[(i * ot + j) * width..(i * ot + j + 1) * width];
                let mut idx = 0;
                for ch in 0..c {
                    for a in 0..kh {
                        let src = &sample[ch * f * t + (i + a) * t + j..][..kw];
                        row[idx..idx + kw].copy_from_slice(src);
                        idx += kw;
                    }
                }
            }
        }
        Tensor::new(&[of * ot, width], cols).unwrap()
    }

    fn col2im(&self, cols: &Tensor, f: usize, t: usize) -> Vec<f64> {
        let (kh, kw) = self.kernel_extent();
        let c = self.in_channels();
        let (of, ot) = (f - kh + 1, t - kw + 1);
        let width = c * kh * kw;
        let mut out = vec![0.0; c * f * t];
        let data = cols.data();
        for i in 0..of {
            for j in 0..ot {
                let row = &data[(i * ot + j) * width..(i * ot + j + 1) * width];
                let mut idx = 0;
                for ch in 0..c {
                    for a in 0..kh {
                        let dst = &mut out[ch * f * t + (i + a) * t + j..][..kw];
                        for (d, s) in dst.iter_mut().zip(&row[idx..idx + kw]) {
                            *d += s;
                        }
                        idx += kw;
                    }
                }
            }
        }
        out
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (&b, rest) = x
            .shape()
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("empty shape".into()))?;
        let [oc, of, ot] = self.output_shape(rest)?;
        let (f, t) = (rest[1], rest[2]);
        let kmat = self.kernel_matrix();
        let per_sample = x.len() / b;
        let outs: Vec<Vec<f64>> = x
            .data()
            .par_chunks(per_sample)
            .map(|sample| {
                let cols = self.im2col(sample, f, t);
                kmat.matmul_transposed(&cols).unwrap().into_data()
            })
            .collect();
        Tensor::new(&[b, oc, of, ot], outs.concat())
    }

    pub fn forward_cached(&self, x: &Tensor, cache: &mut LayerCache) -> Result<Tensor> {
        let y = self.forward(x)?;
        *cache = LayerCache::Input(x.clone());
        Ok(y)
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &Tensor) -> Result<Gradients> {
        let LayerCache::Input(x) = cache else {
            return Err(missing_cache("conv"));
        };
        let b = x.shape()[0];
        let [oc, of, ot] = self.output_shape(&x.shape()[1..])?;
        if upstream.shape() != [b, oc, of, ot] {
            return Err(Error::shape("conv_backward", upstream.shape(), &[b, oc, of, ot]));
        }
        let (f, t) = (x.shape()[2], x.shape()[3]);
        let kmat = self.kernel_matrix();
        let per_in = x.len() / b;
        let per_out = oc * of * ot;
        let parts: Vec<(Tensor, Vec<f64>)> = x
            .data()
            .par_chunks(per_in)
            .zip(upstream.data().par_chunks(per_out))
            .map(|(sample, up)| {
                let cols = self.im2col(sample, f, t);
                let up = Tensor::new(&[oc, of * ot], up.to_vec()).unwrap();
                let gk = up.matmul(&cols).unwrap();
                let gcols = up.transposed_matmul(&kmat).unwrap();
                (gk, self.col2im(&gcols, f, t))
            })
            .collect();
        // Fixed-order reduction keeps the result independent of scheduling.
        let mut grad_k = Tensor::zeros(kmat.shape());
        let mut grad_x = Vec::with_capacity(x.len());
        for (gk, gx) in parts {
            grad_k.add_scaled(&gk, 1.0)?;
            grad_x.extend(gx);
        }
        Ok(Gradients {
            input: Tensor::new(x.shape(), grad_x)?,
            params: vec![grad_k.reshape(self.kernels.shape())?],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    /// Direct nested-loop cross-correlation.
    fn naive(x: &Tensor, k: &Tensor) -> Vec<f64> {
        let [b, c, f, t] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let [oc, _, kh, kw] = [k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]];
        let (of, ot) = (f - kh + 1, t - kw + 1);
        let mut out = vec![0.0; b * oc * of * ot];
        for s in 0..b {
            for o in 0..oc {
                for i in 0..of {
                    for j in 0..ot {
                        let mut acc = 0.0;
                        for ch in 0..c {
                            for a in 0..kh {
                                for e in 0..kw {
                                    acc += x.data()[((s * c + ch) * f + i + a) * t + j + e]
                                        * k.data()[((o * c + ch) * kh + a) * kw + e];
                                }
                            }
                        }
                        out[((s * oc + o) * of + i) * ot + j] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_copies_input() {
        let conv = ConvLayer::new(Tensor::filled(&[1, 1, 1, 1], 1.0), ShareAxis::Both).unwrap();
        let x = Tensor::new(&[1, 1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(conv.forward(&x).unwrap(), x);
    }

    #[test]
    fn all_ones_2x2() {
        let conv = ConvLayer::new(Tensor::filled(&[1, 1, 2, 2], 1.0), ShareAxis::Both).unwrap();
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(conv.forward(&x).unwrap().data(), &[10.0]);
    }

    #[test]
    fn zero_kernels_give_zero_output() {
        let conv = ConvLayer::new(Tensor::zeros(&[3, 2, 2, 2]), ShareAxis::Both).unwrap();
        let x = Tensor::filled(&[2, 2, 4, 5], 1.5);
        assert!(conv.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = Rng::seed_from_u64(9);
        for axis in [ShareAxis::Both, ShareAxis::Time, ShareAxis::Frequency] {
            let (kh, kw) = match axis {
                ShareAxis::Both => (3, 2),
                ShareAxis::Time => (1, 3),
                ShareAxis::Frequency => (3, 1),
            };
            let conv = ConvLayer::init(2, 3, kh, kw, axis, &mut rng).unwrap();
            let x = Tensor::from_fn(&[2, 2, 6, 5], |_| rng.random_range(-1.0..1.0));
            let y = conv.forward(&x).unwrap();
            assert_eq!(y.shape(), &[2, 3, 6 - kh + 1, 5 - kw + 1]);
            for (a, b) in y.data().iter().zip(naive(&x, conv.kernels())) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn axis_kernel_consistency() {
        assert!(ConvLayer::new(Tensor::zeros(&[1, 1, 2, 3]), ShareAxis::Time).is_err());
        assert!(ConvLayer::new(Tensor::zeros(&[1, 1, 2, 3]), ShareAxis::Frequency).is_err());
        assert!(ConvLayer::new(Tensor::zeros(&[1, 1, 1, 3]), ShareAxis::Time).is_ok());
    }

    #[test]
    fn kernel_larger_than_input_is_shape_error() {
        let conv = ConvLayer::new(Tensor::zeros(&[1, 1, 7, 7]), ShareAxis::Both).unwrap();
        let err = conv.forward(&Tensor::zeros(&[1, 1, 24, 6])).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn zero_upstream_and_identity_kernel_backward() {
        let conv = ConvLayer::new(Tensor::filled(&[1, 1, 1, 1], 1.0), ShareAxis::Both).unwrap();
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut cache = LayerCache::Empty;
        conv.forward_cached(&x, &mut cache).unwrap();
        let up = Tensor::new(&[1, 1, 2, 2], vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        let g = conv.backward(&cache, &up).unwrap();
        assert_eq!(g.input, up);
        let g0 = conv.backward(&cache, &Tensor::zeros(&[1, 1, 2, 2])).unwrap();
        assert!(g0.input.data().iter().chain(g0.params[0].data()).all(|&v| v == 0.0));
        assert!(matches!(conv.backward(&LayerCache::Empty, &up), Err(Error::State(_))));
    }

    #[test]
    fn shift_equivariance_along_time() {
        let mut rng = Rng::seed_from_u64(4);
        let conv = ConvLayer::init(1, 2, 3, 3, ShareAxis::Both, &mut rng).unwrap();
        let (f, t) = (6, 9);
        let x = Tensor::from_fn(&[1, 1, f, t], |_| rng.random_range(-1.0..1.0));
        // x shifted one step right along time.
        let shifted = Tensor::from_fn(&[1, 1, f, t], |i| {
            let (r, c) = (i / t, i % t);
            if c == 0 {
                0.0
            } else {
                x.data()[r * t + c - 1]
            }
        });
        let y = conv.forward(&x).unwrap();
        let ys = conv.forward(&shifted).unwrap();
        let ot = t - 2;
        for ch in 0..2 {
            for r in 0..f - 2 {
                for c in 1..ot {
                    let a = ys.data()[(ch * (f - 2) + r) * ot + c];
                    let b = y.data()[(ch * (f - 2) + r) * ot + c - 1];
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
