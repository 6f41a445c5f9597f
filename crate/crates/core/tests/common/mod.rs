//! Shared oracles for the integration and acceptance suites.
#![allow(dead_code)]

use cmdnn::layers::{
    softmax_xent, ActivationKind, ChannelMaxout, ConvLayer, DenseLayer, LayerCache, MaxPoolLayer, MaxoutBlock, Mode,
    Rng, ShareAxis,
};
use cmdnn::network::Layer;
use cmdnn::Tensor;
use rand::{Rng as _, SeedableRng};

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Margin between the winner and runner-up of every max group required for
/// an instance to count as tie-free.
pub const TIE_MARGIN: f64 = 1e-3;
pub const INSTANCES: usize = 20;

/// `|a − n| / max(|a|, |n|, 1e-4)`: relative error, compared absolutely
/// for entries that are essentially zero.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

pub fn uniform(shape: &[usize], rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn objective(layer: &Layer, x: &Tensor, probe: &Tensor) -> f64 {
    let y = layer.forward(x, &mut Mode::Infer, &mut LayerCache::Empty).unwrap();
    y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

/// Largest relative error between backprop and central differences for
/// `L = Σ probe ⊙ layer(x)`, over the input and every parameter entry.
pub fn layer_gradient_error(layer: &Layer, x: &Tensor, rng: &mut Rng) -> f64 {
    let mut cache = LayerCache::Empty;
    let y = layer.forward(x, &mut Mode::Infer, &mut cache).unwrap();
    let probe = uniform(y.shape(), rng);
    let grads = layer.backward(&cache, &probe).unwrap();

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += FD_STEP;
        let mut minus = x.clone();
        minus.data_mut()[i] -= FD_STEP;
        let numeric = (objective(layer, &plus, &probe) - objective(layer, &minus, &probe)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(grads.input.data()[i], numeric));
    }
    let n_params = layer.params().len();
    assert_eq!(grads.params.len(), n_params);
    for p in 0..n_params {
        for i in 0..layer.params()[p].len() {
            let mut plus = layer.clone();
            plus.params_mut()[p].data_mut()[i] += FD_STEP;
            let mut minus = layer.clone();
            minus.params_mut()[p].data_mut()[i] -= FD_STEP;
            let numeric = (objective(&plus, x, &probe) - objective(&minus, x, &probe)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grads.params[p].data()[i], numeric));
        }
    }
    worst
}

/// Smallest gap between the two largest entries of each consecutive group
/// of `k` values.
pub fn group_margin(values: &[f64], k: usize) -> f64 {
    values
        .chunks(k)
        .map(|g| {
            let mut s = g.to_vec();
            s.sort_by(|a, b| b.total_cmp(a));
            if s.len() > 1 {
                s[0] - s[1]
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn pool_margin(x: &Tensor, pf: usize, pt: usize) -> f64 {
    let [b, c, f, t] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let mut windows = Vec::new();
    for s in 0..b * c {
        for of in 0..(f - pf) / pf + 1 {
            for ot in 0..(t - pt) / pt + 1 {
                for i in 0..pf {
                    for j in 0..pt {
                        windows.push(x.data()[s * f * t + (of * pf + i) * t + ot * pt + j]);
                    }
                }
            }
        }
    }
    group_margin(&windows, pf * pt)
}

fn channel_margin(x: &Tensor, k: usize) -> f64 {
    let [b, c, f, t] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let mut groups = Vec::new();
    for s in 0..b {
        for g in 0..c / k {
            for p in 0..f * t {
                for j in 0..k {
                    groups.push(x.data()[((s * c) + g * k + j) * f * t + p]);
                }
            }
        }
    }
    group_margin(&groups, k)
}

/// One randomly drawn gradient-check instance.
pub struct Instance {
    pub layer: Layer,
    pub input: Tensor,
}

pub type Generator = fn(&mut Rng) -> Option<Instance>;

fn dense(rng: &mut Rng, use_bias: bool) -> Option<Instance> {
    let w = uniform(&[4, 5], rng);
    let b = if use_bias {
        uniform(&[4], rng)
    } else {
        Tensor::zeros(&[4])
    };
    Some(Instance {
        layer: Layer::Dense(DenseLayer::new(w, b, use_bias).unwrap()),
        input: uniform(&[3, 5], rng),
    })
}

fn activation(rng: &mut Rng, kind: ActivationKind) -> Option<Instance> {
    let input = uniform(&[3, 7], rng).scale(3.0);
    if kind == ActivationKind::Relu && input.data().iter().any(|v| v.abs() < TIE_MARGIN) {
        return None;
    }
    Some(Instance {
        layer: Layer::Activation(kind),
        input,
    })
}

fn maxout(rng: &mut Rng, k: usize) -> Option<Instance> {
    let linear = DenseLayer::new(uniform(&[3 * k, 4], rng), uniform(&[3 * k], rng), true).unwrap();
    let input = uniform(&[2, 4], rng);
    if group_margin(linear.forward(&input).unwrap().data(), k) < TIE_MARGIN {
        return None;
    }
    Some(Instance {
        layer: Layer::Maxout(MaxoutBlock::new(linear, k).unwrap()),
        input,
    })
}

fn conv(rng: &mut Rng, axis: ShareAxis) -> Option<Instance> {
    let (kh, kw) = match axis {
        ShareAxis::Time => (1, 3),
        ShareAxis::Frequency => (3, 1),
        ShareAxis::Both => (3, 2),
    };
    Some(Instance {
        layer: Layer::Conv(ConvLayer::new(uniform(&[3, 2, kh, kw], rng), axis).unwrap()),
        input: uniform(&[2, 2, 5, 6], rng),
    })
}

fn maxpool(rng: &mut Rng) -> Option<Instance> {
    let input = uniform(&[2, 2, 4, 6], rng);
    if pool_margin(&input, 2, 3) < TIE_MARGIN {
        return None;
    }
    Some(Instance {
        layer: Layer::MaxPool(MaxPoolLayer::new(2, 3).unwrap()),
        input,
    })
}

fn channel_maxout(rng: &mut Rng) -> Option<Instance> {
    let input = uniform(&[2, 6, 3, 2], rng);
    if channel_margin(&input, 3) < TIE_MARGIN {
        return None;
    }
    Some(Instance {
        layer: Layer::ChannelMaxout(ChannelMaxout::new(3).unwrap()),
        input,
    })
}

/// Every layer kind covered by the gradient oracle.
pub fn layer_kinds() -> Vec<(&'static str, Generator)> {
    vec![
        ("dense+bias", |r| dense(r, true)),
        ("dense-nobias", |r| dense(r, false)),
        ("sigmoid", |r| activation(r, ActivationKind::Sigmoid)),
        ("relu", |r| activation(r, ActivationKind::Relu)),
        ("softplus", |r| activation(r, ActivationKind::Softplus)),
        ("maxout-k2", |r| maxout(r, 2)),
        ("maxout-k3", |r| maxout(r, 3)),
        ("conv-1d-time", |r| conv(r, ShareAxis::Time)),
        ("conv-1d-freq", |r| conv(r, ShareAxis::Frequency)),
        ("conv-2d", |r| conv(r, ShareAxis::Both)),
        ("maxpool", maxpool),
        ("channel-maxout", channel_maxout),
    ]
}

/// Worst error over [`INSTANCES`] tie-free draws of one kind, and the number
/// of draws checked.
pub fn check_kind(gen: Generator, seed: u64) -> (f64, usize) {
    let mut rng = Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut accepted = 0;
    while accepted < INSTANCES {
        if let Some(inst) = gen(&mut rng) {
            worst = worst.max(layer_gradient_error(&inst.layer, &inst.input, &mut rng));
            accepted += 1;
        }
    }
    (worst, accepted)
}

/// Worst error of the softmax cross-entropy logit gradient over
/// [`INSTANCES`] random draws.
pub fn check_softmax_xent(seed: u64) -> f64 {
    let mut rng = Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let logits = uniform(&[4, 6], &mut rng).scale(3.0);
        let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..6)).collect();
        let (_, grad) = softmax_xent(&logits, &labels).unwrap();
        for i in 0..logits.len() {
            let mut plus = logits.clone();
            plus.data_mut()[i] += FD_STEP;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= FD_STEP;
            let numeric =
                (softmax_xent(&plus, &labels).unwrap().0 - softmax_xent(&minus, &labels).unwrap().0) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grad.data()[i], numeric));
        }
    }
    worst
}

/// Nearest-prototype classification accuracy in percent.
pub fn nearest_prototype_accuracy(ds: &cmdnn::dataset::FrameDataset, prototypes: &[Vec<f64>]) -> f64 {
    let mut correct = 0;
    for i in 0..ds.len() {
        let row = ds.row(i);
        let dist = |p: &Vec<f64>| row.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let best = (0..prototypes.len())
            .min_by(|&a, &b| dist(&prototypes[a]).total_cmp(&dist(&prototypes[b])))
            .unwrap();
        correct += usize::from(best == ds.labels()[i]);
    }
    100.0 * correct as f64 / ds.len() as f64
}
