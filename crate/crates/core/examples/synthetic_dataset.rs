//! Generates the synthetic speaker-partitioned frame dataset and reports
//! how a nearest-prototype classifier does with and without nuisance.
//!
//! ```text
//! cargo run --release --example synthetic_dataset
//! ```

use cmdnn::dataset::{split_by_speaker, FrameDataset, SplitSpec, SynthConfig};

fn nearest_prototype(ds: &FrameDataset, protos: &[Vec<f64>]) -> f64 {
    let hits = (0..ds.len())
        .filter(|&i| {
            let dist = |p: &Vec<f64>| ds.row(i).iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let best = (0..protos.len()).min_by(|&a, &b| dist(&protos[a]).total_cmp(&dist(&protos[b])));
            best == Some(ds.labels()[i])
        })
        .count();
    100.0 * hits as f64 / ds.len() as f64
}

fn main() -> cmdnn::Result<()> {
    let cfg = SynthConfig::default();
    for (label, c) in [("default", cfg.clone()), ("noiseless", cfg.noiseless())] {
        let ds = c.generate()?;
        println!(
            "{label:>9}: {} frames, {} speakers, {} classes, nearest prototype {:.2}%",
            ds.len(),
            ds.speaker_set().len(),
            ds.class_count(),
            nearest_prototype(&ds, &c.prototypes())
        );
    }
    let ds = cfg.generate()?;
    let (train, test) = split_by_speaker(&ds, &SplitSpec::hold_out_last(&ds, 7)?)?;
    println!("split: {} training frames, {} held-out frames", train.len(), test.len());
    Ok(())
}
