//! The learning-rate schedule driven by held-out accuracy: a non-improving
//! epoch restores the best weights and halves the rate, and training stops
//! after the halving limit.
//!
//! ```text
//! cargo run --example lr_schedule
//! ```

use cmdnn::layers::{DenseLayer, Rng};
use cmdnn::network::{InputLayout, Layer, Network};
use cmdnn::train::{TrainConfig, TrainState};
use rand::SeedableRng;

fn main() -> cmdnn::Result<()> {
    let mut rng = Rng::seed_from_u64(0);
    let mut net = Network::new(
        InputLayout::Flat(2),
        vec![Layer::Dense(DenseLayer::init(2, 2, true, &mut rng))],
    )?;
    let cfg = TrainConfig::default();
    let mut state = TrainState::new(&cfg, &net);
    let accuracies = [41.0, 55.0, 54.0, 60.0, 60.0, 62.5, 61.0, 63.0, 50.0, 49.0, 70.0];
    for acc in accuracies {
        let lr = state.lr;
        let outcome = state.epoch_end_schedule(acc, &mut net)?;
        println!(
            "epoch {:>2} acc {acc:>5.1} lr {lr:<9} -> {outcome:?} (best {:?} at epoch {})",
            state.epoch, state.best_acc, state.best_epoch
        );
        if state.stopped {
            break;
        }
    }
    println!("final lr {}", state.lr);
    Ok(())
}
