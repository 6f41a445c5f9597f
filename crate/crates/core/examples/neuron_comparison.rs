//! Compares sigmoid, ReLU and maxout hidden units, a pretrained sigmoid
//! stack and a convolutional maxout net with dropout on the default
//! synthetic dataset, over several seeds.
//!
//! ```text
//! cargo run --release --example neuron_comparison -- [seeds] [max_epochs]
//! ```

use cmdnn::dataset::SynthConfig;
use cmdnn::experiment::{parse_grid_config, run_grid, ExperimentConfig};
use cmdnn::train::TrainConfig;

fn main() -> cmdnn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(5, |s| s.parse().expect("seed count"));
    let max_epochs: usize = args.next().map_or(30, |s| s.parse().expect("epoch count"));
    let seed_list = (0..seeds).map(|s| s.to_string()).collect::<Vec<_>>().join(",");

    let grid = format!(
        "FC-2hidden-64 -- --neuron sigmoid --seeds {seed_list}
         FC-2hidden-64 -- --neuron relu --seeds {seed_list}
         FC-2hidden-64 -- --neuron maxout --seeds {seed_list}
         Pre-trained_FC 80-80-64-64-64 -- --neuron sigmoid --seeds {seed_list}
         2D-CMNN C8 K5 S2 F64 F64 -- --dropout 0.7 --seeds {seed_list}"
    );
    let entries = parse_grid_config(&grid)?;
    let data = SynthConfig::default().generate()?;
    let cfg = ExperimentConfig {
        train: TrainConfig {
            max_epochs,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let report = run_grid(&entries, &data, &cfg)?;
    print!("{}", report.table());
    Ok(())
}
