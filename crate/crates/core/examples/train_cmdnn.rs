//! Trains the full convolutional maxout network with dropout and max-norm
//! on the synthetic dataset and prints its learning curve.
//!
//! ```text
//! cargo run --release --example train_cmdnn -- [max_epochs]
//! ```

use cmdnn::dataset::{split_by_speaker, SplitSpec, SynthConfig};
use cmdnn::experiment::{run_experiment, ExperimentConfig, NeuronModel, StructureSpec};
use cmdnn::features::FeatureNormalizer;
use cmdnn::train::TrainConfig;

fn main() -> cmdnn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let max_epochs = std::env::args().nth(1).map_or(20, |s| s.parse().expect("epoch count"));
    let data = SynthConfig::default().generate()?;
    let (train, test) = split_by_speaker(&data, &SplitSpec::hold_out_last(&data, 7)?)?;
    let norm = FeatureNormalizer::fit_dataset(&train)?;
    let (train, test) = (norm.apply_dataset(&train)?, norm.apply_dataset(&test)?);

    let spec = StructureSpec::new("2D-CMNN C8 K5 S2 F64 F64", NeuronModel::Maxout, None, Some(0.7))?;
    let cfg = ExperimentConfig {
        train: TrainConfig {
            max_epochs,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let run = run_experiment(&spec, &train, &test, &cfg, 0)?;
    println!("{}", run.network.manifest());
    println!(
        "best held-out accuracy {:.2}% at epoch {} ({:.1}s)",
        run.result.acc, run.result.epochs, run.result.seconds
    );
    Ok(())
}
