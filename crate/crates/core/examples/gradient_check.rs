//! Compares backpropagated gradients of a small conv + maxout network with
//! central finite differences of the cross-entropy loss.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use cmdnn::experiment::{NeuronModel, StructureSpec};
use cmdnn::layers::{softmax_xent, Mode, Rng};
use cmdnn::Tensor;
use rand::{Rng as _, SeedableRng};

fn main() -> cmdnn::Result<()> {
    let mut rng = Rng::seed_from_u64(1);
    let spec = StructureSpec::new("2D-CMNN C2 K3 S2 F8", NeuronModel::Maxout, None, None)?;
    let net = spec.to_config(5, 6, 4)?.build(&mut rng)?;
    let rows = Tensor::from_fn(&[3, 30], |_| rng.random_range(-1.0..1.0));
    let labels = [0, 3, 1];
    let loss = |n: &cmdnn::network::Network| softmax_xent(&n.logits(&rows).unwrap(), &labels).unwrap().0;

    let (logits, tape) = net.forward(&rows, &mut Mode::Infer)?;
    let grads = net.backward(&tape, &softmax_xent(&logits, &labels)?.1)?;
    let h = 1e-6;
    for (li, layer) in net.layers().iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (pi, g) in grads[li].iter().enumerate() {
            for i in 0..g.len() {
                let mut plus = net.clone();
                plus.layers_mut()[li].params_mut()[pi].data_mut()[i] += h;
                let mut minus = net.clone();
                minus.layers_mut()[li].params_mut()[pi].data_mut()[i] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let scale = g.data()[i].abs().max(numeric.abs()).max(1e-4);
                worst = worst.max((g.data()[i] - numeric).abs() / scale);
            }
        }
        if !grads[li].is_empty() {
            println!("{:<40} worst relative error {worst:.2e}", layer.to_string());
        }
    }
    Ok(())
}
