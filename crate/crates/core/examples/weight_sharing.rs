//! Convolution over a context window of filter-bank frames, with kernels
//! shared along time, frequency, or both, followed by channel maxout and
//! max pooling.
//!
//! ```text
//! cargo run --example weight_sharing
//! ```

use cmdnn::experiment::{NeuronModel, StructureSpec};
use cmdnn::layers::{Rng, ShareAxis};
use rand::SeedableRng;

fn main() -> cmdnn::Result<()> {
    let (width, n_filters, classes) = (15, 24, 30);
    let cases = [
        ("1D-CMNN C8 K5 S2 F64", Some(ShareAxis::Time)),
        ("1D-CMNN C8 K5 S2 F64", Some(ShareAxis::Frequency)),
        ("2D-CMNN C8 K5 S2 F64", None),
    ];
    for (structure, share) in cases {
        let spec = StructureSpec::new(structure, NeuronModel::Maxout, share, None)?;
        let net = spec
            .to_config(width, n_filters, classes)?
            .build(&mut Rng::seed_from_u64(0))?;
        let label = share.map_or("T&F".to_string(), |s| s.to_string());
        println!("{structure} sharing {label}: {} parameters", net.param_count());
        for line in net.manifest().lines() {
            println!("    {line}");
        }
    }
    Ok(())
}
