mod common;

use cmdnn::layers::{softmax_xent, ActivationKind, ConvLayer, DenseLayer, Mode, Rng, ShareAxis};
use cmdnn::network::{InputLayout, Layer, Network};
use common::{check_kind, check_softmax_xent, layer_kinds, rel_err, uniform, FD_STEP, FD_TOLERANCE, INSTANCES};
use rand::{Rng as _, SeedableRng};

fn assert_kind(name: &str) {
    let (_, gen) = layer_kinds().into_iter().find(|(n, _)| *n == name).unwrap();
    let (worst, n) = check_kind(gen, 17);
    assert!(n >= INSTANCES);
    assert!(worst <= FD_TOLERANCE, "{name}: worst relative error {worst:e}");
}

#[test]
fn dense_with_bias() {
    assert_kind("dense+bias");
}

#[test]
fn dense_without_bias() {
    assert_kind("dense-nobias");
}

#[test]
fn sigmoid() {
    assert_kind("sigmoid");
}

#[test]
fn relu() {
    assert_kind("relu");
}

#[test]
fn softplus() {
    assert_kind("softplus");
}

#[test]
fn maxout_group_of_two() {
    assert_kind("maxout-k2");
}

#[test]
fn maxout_group_of_three() {
    assert_kind("maxout-k3");
}

#[test]
fn conv_time_sharing() {
    assert_kind("conv-1d-time");
}

#[test]
fn conv_frequency_sharing() {
    assert_kind("conv-1d-freq");
}

#[test]
fn conv_two_dimensional() {
    assert_kind("conv-2d");
}

#[test]
fn max_pooling() {
    assert_kind("maxpool");
}

#[test]
fn channel_maxout() {
    assert_kind("channel-maxout");
}

#[test]
fn softmax_cross_entropy() {
    let worst = check_softmax_xent(5);
    assert!(worst <= 1e-6, "worst relative error {worst:e}");
}

/// Chains smooth layers behind a spectrogram input so the transposition in
/// the input layout is part of the checked path.
#[test]
fn whole_network_loss_gradient() {
    let mut rng = Rng::seed_from_u64(3);
    let conv = ConvLayer::new(uniform(&[2, 1, 2, 2], &mut rng), ShareAxis::Both).unwrap();
    // 4 filters × 3 frames → conv output [2, 3, 2]
    let net = Network::new(
        InputLayout::Spectrogram { width: 3, n_filters: 4 },
        vec![
            Layer::Conv(conv),
            Layer::Activation(ActivationKind::Softplus),
            Layer::Dense(DenseLayer::new(uniform(&[5, 12], &mut rng), uniform(&[5], &mut rng), true).unwrap()),
            Layer::Activation(ActivationKind::Sigmoid),
            Layer::Dense(DenseLayer::new(uniform(&[3, 5], &mut rng), uniform(&[3], &mut rng), true).unwrap()),
        ],
    )
    .unwrap();
    let rows = uniform(&[4, 12], &mut rng);
    let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..3)).collect();
    let loss = |n: &Network| softmax_xent(&n.logits(&rows).unwrap(), &labels).unwrap().0;

    let (logits, tape) = net.forward(&rows, &mut Mode::Infer).unwrap();
    let (_, grad) = softmax_xent(&logits, &labels).unwrap();
    let grads = net.backward(&tape, &grad).unwrap();
    let mut worst: f64 = 0.0;
    for (li, layer_grads) in grads.iter().enumerate() {
        for (pi, g) in layer_grads.iter().enumerate() {
            for i in 0..g.len() {
                let mut plus = net.clone();
                plus.layers_mut()[li].params_mut()[pi].data_mut()[i] += FD_STEP;
                let mut minus = net.clone();
                minus.layers_mut()[li].params_mut()[pi].data_mut()[i] -= FD_STEP;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * FD_STEP);
                worst = worst.max(rel_err(g.data()[i], numeric));
            }
        }
    }
    assert!(worst <= FD_TOLERANCE, "worst relative error {worst:e}");
}
