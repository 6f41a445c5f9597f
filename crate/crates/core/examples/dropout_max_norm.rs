//! Dropout masks during training, weight scaling at inference, and the
//! per-unit max-norm projection.
//!
//! ```text
//! cargo run --example dropout_max_norm
//! ```

use cmdnn::layers::{dropout_scale_for_inference, dropout_train_forward, DropoutSpec};
use cmdnn::train::{max_norm_project, TrainConfig};
use cmdnn::Tensor;

fn main() -> cmdnn::Result<()> {
    let p = 0.7;
    let spec = DropoutSpec::new(p)?;
    let x = Tensor::from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    for seed in 0..3 {
        let (y, _) = dropout_train_forward(&spec, &x, seed);
        println!("train pass {seed}: {:?}", y.data());
    }
    let w = Tensor::from_rows(&[&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]]);
    let scaled = dropout_scale_for_inference(&w, p)?;
    println!("next-layer weights at inference: {:?}", scaled.data());

    let c = TrainConfig::DEFAULT_MAX_NORM;
    let big = Tensor::from_rows(&[&[3.0, 4.0], &[0.6, 0.8]]);
    let projected = max_norm_project(&big, c);
    for (before, after) in big.data().chunks(2).zip(projected.data().chunks(2)) {
        let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!(
            "row {before:?} norm {:.3} -> {after:?} norm {:.3}",
            norm(before),
            norm(after)
        );
    }
    Ok(())
}
