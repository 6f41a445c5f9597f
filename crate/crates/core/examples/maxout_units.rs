//! A maxout layer takes the maximum over groups of `k` linear pieces, and
//! its backward pass sends each unit's gradient to the winning piece only.
//!
//! ```text
//! cargo run --example maxout_units
//! ```

use cmdnn::layers::{DenseLayer, LayerCache, MaxoutBlock};
use cmdnn::Tensor;

fn main() -> cmdnn::Result<()> {
    // Two maxout units with two pieces each over a 2-dimensional input.
    let weights = Tensor::new(&[4, 2], vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0])?;
    let block = MaxoutBlock::new(DenseLayer::without_bias(weights)?, 2)?;
    let x = Tensor::from_rows(&[&[0.5, -2.0], &[-3.0, 1.0]]);

    let mut cache = LayerCache::Empty;
    let y = block.forward_cached(&x, &mut cache)?;
    println!("input      {:?}", x.data());
    println!("maxout     {:?}  (|x0|, |x1| per sample)", y.data());

    let routed = block.route_upstream(&cache, &Tensor::filled(&[2, 2], 1.0))?;
    println!("routed     {:?}", routed.data());
    Ok(())
}
