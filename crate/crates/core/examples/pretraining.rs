//! Greedy layer-wise autoencoder pretraining of a sigmoid stack, showing
//! the reconstruction error of the first layer before and after.
//!
//! ```text
//! cargo run --release --example pretraining
//! ```

use cmdnn::dataset::SynthConfig;
use cmdnn::experiment::{NeuronModel, StructureSpec};
use cmdnn::layers::Rng;
use cmdnn::network::Layer;
use cmdnn::pretrain::{pretrain_stack, tied_reconstruction_mse, PretrainConfig};
use rand::SeedableRng;

fn main() -> cmdnn::Result<()> {
    let ds = SynthConfig {
        n_speakers: 6,
        frames_per_speaker: 100,
        ..SynthConfig::default()
    }
    .generate()?;
    let spec = StructureSpec::new("Pre-trained_FC 80-64-64", NeuronModel::Sigmoid, None, None)?;
    let net = spec
        .to_config(15, 24, ds.class_count())?
        .build(&mut Rng::seed_from_u64(0))?;
    let pre = pretrain_stack(&net, &ds, &PretrainConfig::default())?;

    let all: Vec<usize> = (0..ds.len()).collect();
    let (rows, _) = ds.batch(&all)?;
    for (label, n) in [("random init", &net), ("pretrained ", &pre)] {
        let Layer::Dense(first) = &n.layers()[0] else {
            unreachable!()
        };
        println!(
            "{label}: first-layer reconstruction MSE {:.4}",
            tied_reconstruction_mse(first, &rows)?
        );
    }
    Ok(())
}
