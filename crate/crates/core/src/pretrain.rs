//! Greedy layer-wise autoassociative pretraining for sigmoid stacks.
//!
//! Each hidden layer is trained in turn as the encoder of a one-layer
//! autoencoder (linear decoder, tied to the encoder transpose by default)
//! on the activations of the layers below it. Decoders are discarded; the
//! output layer keeps its random initialization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::dataset::FrameDataset;
use crate::error::{Error, Result};
use crate::layers::{ActivationKind, DenseLayer, Rng};
use crate::network::{Layer, Network};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub epochs_per_layer: usize,
    pub lr: f64,
    /// Std of Gaussian corruption added to encoder inputs; 0 disables it.
    pub noise_std: f64,
    pub tied_decoder: bool,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs_per_layer: 5,
            lr: 0.05,
            noise_std: 0.0,
            tied_decoder: true,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Autoencoder around an encoder: `h = σ(xWᵀ + b)`, `x̂ = hD + c` where `D`
/// is `W` itself when tied.
struct AutoEncoder {
    encoder: DenseLayer,
    decoder: Option<Tensor>,
    decoder_bias: Tensor,
}

impl AutoEncoder {
    fn new(encoder: DenseLayer, tied: bool, rng: &mut Rng) -> Self {
        let (out, inp) = (encoder.outputs(), encoder.inputs());
        let decoder = (!tied).then(|| DenseLayer::init(out, inp, false, rng).weights().clone());
        AutoEncoder {
            encoder,
            decoder,
            decoder_bias: Tensor::zeros(&[inp]),
        }
    }

    fn encode(&self, x: &Tensor) -> Result<Tensor> {
        Ok(ActivationKind::Sigmoid.forward(&self.encoder.forward(x)?))
    }

    fn decode(&self, h: &Tensor) -> Result<Tensor> {
        let mut r = match &self.decoder {
            None => h.matmul(self.encoder.weights())?,
            Some(d) => h.matmul_transposed(d)?,
        };
        let width = r.shape()[1];
        for row in r.data_mut().chunks_mut(width) {
            for (v, c) in row.iter_mut().zip(self.decoder_bias.data()) {
                *v += c;
            }
        }
        Ok(r)
    }

    fn mse(&self, x: &Tensor) -> Result<f64> {
        let r = self.decode(&self.encode(x)?)?;
        Ok(r.data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / x.len() as f64)
    }

    /// One SGD step on mean squared reconstruction error of `target` from
    /// `input`.
    fn step(&mut self, input: &Tensor, target: &Tensor, lr: f64) -> Result<()> {
        let h = self.encode(input)?;
        let r = self.decode(&h)?;
        let scale = 2.0 / r.len() as f64;
        let dr = r.zip_map(target, |a, b| scale * (a - b))?;

        let mut grad_c = vec![0.0; dr.shape()[1]];
        for row in dr.data().chunks(grad_c.len()) {
            for (g, v) in grad_c.iter_mut().zip(row) {
                *g += v;
            }
        }
        let (dh, grad_dec) = match &self.decoder {
            None => (dr.matmul_transposed(self.encoder.weights())?, h.transposed_matmul(&dr)?),
            Some(d) => (dr.matmul(d)?, dr.transposed_matmul(&h)?),
        };
        let dz = dh.zip_map(&h, |g, s| g * s * (1.0 - s))?;
        let mut grad_w = dz.transposed_matmul(&input.clone().flatten_batch())?;
        if self.decoder.is_none() {
            grad_w.add_scaled(&grad_dec, 1.0)?;
        }
        let mut grad_b = vec![0.0; dz.shape()[1]];
        for row in dz.data().chunks(grad_b.len()) {
            for (g, v) in grad_b.iter_mut().zip(row) {
                *g += v;
            }
        }

        let use_bias = self.encoder.use_bias();
        let mut params = self.encoder.params_mut();
        params[0].add_scaled(&grad_w, -lr)?;
        if use_bias {
            params[1].add_scaled(&Tensor::new(&[grad_b.len()], grad_b)?, -lr)?;
        }
        if let Some(d) = &mut self.decoder {
            d.add_scaled(&grad_dec, -lr)?;
        }
        self.decoder_bias
            .add_scaled(&Tensor::new(&[grad_c.len()], grad_c)?, -lr)?;
        Ok(())
    }
}

/// Mean squared reconstruction error of `inputs` through `encoder` and its
/// tied decoder with zero decoder bias.
pub fn tied_reconstruction_mse(encoder: &DenseLayer, inputs: &Tensor) -> Result<f64> {
    AutoEncoder {
        encoder: encoder.clone(),
        decoder: None,
        decoder_bias: Tensor::zeros(&[encoder.inputs()]),
    }
    .mse(inputs)
}

/// Trains a sigmoid encoder to reconstruct `inputs` and returns it together
/// with the final reconstruction MSE.
pub fn pretrain_layer(encoder: &DenseLayer, inputs: &Tensor, cfg: &PretrainConfig) -> Result<(DenseLayer, f64)> {
    if inputs.rank() != 2 || inputs.shape()[1] != encoder.inputs() {
        return Err(Error::shape("pretrain_layer", inputs.shape(), &[0, encoder.inputs()]));
    }
    if cfg.batch_size == 0 || cfg.noise_std.is_nan() || cfg.noise_std < 0.0 {
        return Err(Error::Config(
            "pretraining needs batch_size >= 1 and noise_std >= 0".into(),
        ));
    }
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut ae = AutoEncoder::new(encoder.clone(), cfg.tied_decoder, &mut rng);
    if cfg.epochs_per_layer == 0 {
        let mse = ae.mse(inputs)?;
        return Ok((ae.encoder, mse));
    }
    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE)).unwrap();
    let n = inputs.shape()[0];
    let width = inputs.shape()[1];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs_per_layer {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mut target = Vec::with_capacity(chunk.len() * width);
            for &i in chunk {
                target.extend_from_slice(inputs.row(i));
            }
            let target = Tensor::new(&[chunk.len(), width], target)?;
            let input = if cfg.noise_std > 0.0 {
                let jitter = Tensor::from_fn(target.shape(), |_| noise.sample(&mut rng));
                target.zip_map(&jitter, |a, b| a + b)?
            } else {
                target.clone()
            };
            ae.step(&input, &target, cfg.lr)?;
        }
    }
    let mse = ae.mse(inputs)?;
    Ok((ae.encoder, mse))
}

/// Pretrains every hidden layer of a dense sigmoid stack bottom-up on the
/// activations of `ds`. The final dense layer is treated as the output
/// layer and left untouched.
pub fn pretrain_stack(net: &Network, ds: &FrameDataset, cfg: &PretrainConfig) -> Result<Network> {
    let hidden = sigmoid_hidden_layers(net)?;
    let mut out = net.clone();
    let all: Vec<usize> = (0..ds.len()).collect();
    let (rows, _) = ds.batch(&all)?;
    let mut current = net.input_layout().prepare(&rows)?.flatten_batch();
    for (depth, &li) in hidden.iter().enumerate() {
        let Layer::Dense(enc) = &out.layers()[li] else {
            unreachable!()
        };
        let before = tied_reconstruction_mse(enc, &current)?;
        let layer_cfg = PretrainConfig {
            seed: cfg.seed.wrapping_add(depth as u64),
            ..cfg.clone()
        };
        let (trained, after) = pretrain_layer(enc, &current, &layer_cfg)?;
        log::info!(
            "pretrain layer {}: reconstruction mse {before:.6} -> {after:.6}",
            depth + 1
        );
        current = ActivationKind::Sigmoid.forward(&trained.forward(&current)?);
        out.layers_mut()[li] = Layer::Dense(trained);
    }
    Ok(out)
}

/// Indices of the dense layers feeding a sigmoid. Errors if the stack holds
/// anything other than dense/sigmoid/dropout layers ending in a dense
/// output layer.
fn sigmoid_hidden_layers(net: &Network) -> Result<Vec<usize>> {
    let layers = net.layers();
    let mut hidden = Vec::new();
    for (i, layer) in layers.iter().enumerate() {
        match layer {
            Layer::Dense(_) => match layers.get(i + 1) {
                Some(Layer::Activation(ActivationKind::Sigmoid)) => hidden.push(i),
                None => {}
                Some(other) => {
                    return Err(Error::Config(format!(
                        "pretraining needs sigmoid hidden layers, found dense followed by `{other}`"
                    )))
                }
            },
            Layer::Activation(ActivationKind::Sigmoid) | Layer::Dropout(_) => {}
            other => {
                return Err(Error::Config(format!(
                    "pretraining supports only dense sigmoid stacks, found `{other}`"
                )))
            }
        }
    }
    if !matches!(layers.last(), Some(Layer::Dense(_))) {
        return Err(Error::Config("stack must end in a dense output layer".into()));
    }
    if hidden.is_empty() {
        return Err(Error::Config("no hidden layers to pretrain".into()));
    }
    Ok(hidden)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{InputLayout, LayerSpec, NetworkConfig};
    use rand::Rng as _;

    fn data(n: usize, d: usize, seed: u64) -> Tensor {
        let mut rng = Rng::seed_from_u64(seed);
        Tensor::from_fn(&[n, d], |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_epochs_leaves_weights() {
        let mut rng = Rng::seed_from_u64(1);
        let enc = DenseLayer::init(6, 6, true, &mut rng);
        let cfg = PretrainConfig {
            epochs_per_layer: 0,
            ..PretrainConfig::default()
        };
        let (out, _) = pretrain_layer(&enc, &data(10, 6, 2), &cfg).unwrap();
        assert_eq!(out, enc);
    }

    #[test]
    fn reconstruction_improves_on_random_init() {
        let mut rng = Rng::seed_from_u64(3);
        let enc = DenseLayer::init(8, 8, true, &mut rng);
        let x = data(40, 8, 4);
        let baseline = tied_reconstruction_mse(&enc, &x).unwrap();
        for tied in [true, false] {
            let cfg = PretrainConfig {
                epochs_per_layer: 200,
                tied_decoder: tied,
                ..PretrainConfig::default()
            };
            let (_, mse) = pretrain_layer(&enc, &x, &cfg).unwrap();
            assert!(mse < baseline, "tied={tied}: {mse} !< {baseline}");
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let mut rng = Rng::seed_from_u64(5);
        let enc = DenseLayer::init(5, 3, true, &mut rng);
        let x = data(30, 5, 6);
        let cfg = PretrainConfig {
            noise_std: 0.1,
            ..PretrainConfig::default()
        };
        assert_eq!(
            pretrain_layer(&enc, &x, &cfg).unwrap(),
            pretrain_layer(&enc, &x, &cfg).unwrap()
        );
    }

    #[test]
    fn maxout_stack_rejected() {
        let mut rng = Rng::seed_from_u64(0);
        let net = NetworkConfig {
            input: InputLayout::Flat(4),
            layers: vec![LayerSpec::Maxout { units: 3, k: 2 }, LayerSpec::Output { classes: 2 }],
        }
        .build(&mut rng)
        .unwrap();
        let ds = FrameDataset::new(vec![0.0; 8], 4, vec![0, 1], vec![0, 0], 2).unwrap();
        assert!(matches!(
            pretrain_stack(&net, &ds, &PretrainConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_hidden_matches_one_layer_call() {
        let mut rng = Rng::seed_from_u64(7);
        let net = NetworkConfig {
            input: InputLayout::Flat(4),
            layers: vec![
                LayerSpec::Dense {
                    units: 3,
                    activation: ActivationKind::Sigmoid,
                    bias: true,
                },
                LayerSpec::Output { classes: 2 },
            ],
        }
        .build(&mut rng)
        .unwrap();
        let x = data(12, 4, 8);
        let ds = FrameDataset::new(x.data().to_vec(), 4, vec![0; 12], vec![0; 12], 2).unwrap();
        let cfg = PretrainConfig::default();
        let stacked = pretrain_stack(&net, &ds, &cfg).unwrap();
        let Layer::Dense(enc) = &net.layers()[0] else { panic!() };
        let (direct, _) = pretrain_layer(enc, &x, &cfg).unwrap();
        assert_eq!(stacked.layers()[0], Layer::Dense(direct));
        assert_eq!(stacked.layers()[2], net.layers()[2]);
    }
}
