//! Mini-batch SGD with a learning-rate halving schedule.
//!
//! After every epoch the network is scored on an evaluation split. An epoch
//! that beats the best accuracy so far is snapshotted; any other epoch
//! halves the learning rate and rolls the weights back to the best
//! snapshot. Training stops once the rate has been halved `halving_limit`
//! times, and the best snapshot is returned.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::dataset::FrameDataset;
use crate::error::{Error, Result};
use crate::layers::{softmax_xent, Mode, Rng};
use crate::network::Network;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub halving_limit: usize,
    /// Radius of the per-unit max-norm ball; `None` disables the constraint.
    pub max_norm: Option<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 0.1,
            halving_limit: 5,
            max_norm: None,
            batch_size: 128,
            max_epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Default max-norm radius used when the network has unbounded units.
    pub const DEFAULT_MAX_NORM: f64 = 2.0;

    /// Defaults, with max-norm `C = 2` switched on when `net` contains
    /// rectified or maxout units.
    pub fn for_network(net: &Network) -> Self {
        TrainConfig {
            max_norm: net.has_unbounded_units().then_some(Self::DEFAULT_MAX_NORM),
            ..TrainConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!(
                "initial_lr must be > 0, got {}",
                self.initial_lr
            )));
        }
        if self.halving_limit == 0 {
            return Err(Error::Config("halving_limit must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if let Some(c) = self.max_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::Config(format!("max-norm radius must be > 0, got {c}")));
            }
        }
        Ok(())
    }
}

/// One completed epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub acc: f64,
    /// Learning rate in effect while the epoch ran.
    pub lr: f64,
    pub seconds: f64,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,loss,acc,lr,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.3}",
            self.epoch, self.loss, self.acc, self.lr, self.seconds
        )
    }
}

/// Appends records to a CSV file, writing the header when the file is new.
pub fn append_epoch_csv(path: impl AsRef<Path>, records: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{}", EpochRecord::CSV_HEADER)?;
    }
    for r in records {
        writeln!(f, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochOutcome {
    Improved,
    /// Accuracy did not beat the best; rate halved and weights rolled back.
    Regressed,
    /// Regressed for the `halving_limit`-th time; training is over.
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    pub lr: f64,
    pub halvings: usize,
    pub best_acc: Option<f64>,
    pub best_epoch: usize,
    pub best_weights: Vec<u8>,
    pub stopped: bool,
    initial_lr: f64,
    halving_limit: usize,
}

impl TrainState {
    /// Fresh schedule whose initial snapshot is `net`'s current weights.
    pub fn new(cfg: &TrainConfig, net: &Network) -> Self {
        TrainState {
            epoch: 0,
            lr: cfg.initial_lr,
            halvings: 0,
            best_acc: None,
            best_epoch: 0,
            best_weights: net.snapshot(),
            stopped: false,
            initial_lr: cfg.initial_lr,
            halving_limit: cfg.halving_limit,
        }
    }

    /// Applies the end-of-epoch rule to `net` given its evaluation accuracy.
    /// Ties with the best accuracy count as regressions.
    pub fn epoch_end_schedule(&mut self, eval_acc: f64, net: &mut Network) -> Result<EpochOutcome> {
        if self.stopped {
            return Err(Error::State("schedule already stopped".into()));
        }
        self.epoch += 1;
        if self.best_acc.is_none_or(|best| eval_acc > best) {
            self.best_acc = Some(eval_acc);
            self.best_epoch = self.epoch;
            self.best_weights = net.snapshot();
            return Ok(EpochOutcome::Improved);
        }
        self.halvings += 1;
        self.lr = self.initial_lr / 2f64.powi(self.halvings as i32);
        net.restore(&self.best_weights)?;
        if self.halvings >= self.halving_limit {
            self.stopped = true;
            Ok(EpochOutcome::Stopped)
        } else {
            Ok(EpochOutcome::Regressed)
        }
    }
}

/// `p ← p − lr·g` for every parameter/gradient pair.
pub fn sgd_step(params: &mut [&mut Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::InvalidArgument(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        p.add_scaled(g, -lr)?;
    }
    Ok(())
}

/// Rescales every row (leading-axis slice) whose Euclidean norm exceeds `c`
/// back onto the sphere of radius `c`.
pub fn max_norm_project(weights: &Tensor, c: f64) -> Tensor {
    let mut w = weights.clone();
    max_norm_project_in_place(&mut w, c);
    w
}

pub fn max_norm_project_in_place(weights: &mut Tensor, c: f64) {
    let rows = weights.shape()[0];
    let width = weights.len() / rows;
    for row in weights.data_mut().chunks_mut(width) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > c {
            let s = c / norm;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Percentage of positions where prediction equals label.
pub fn frame_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "need equal, nonempty inputs; got {} predictions and {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * hits as f64 / predictions.len() as f64)
}

const EVAL_CHUNK: usize = 512;

/// Frame accuracy of `net` on `ds`, with dropout folded into the weights.
pub fn evaluate(net: &Network, ds: &FrameDataset) -> Result<f64> {
    let infer = net.inference_network();
    let mut preds = Vec::with_capacity(ds.len());
    let idx: Vec<usize> = (0..ds.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, _) = ds.batch(chunk)?;
        preds.extend(infer.predict(&x)?);
    }
    frame_accuracy(&preds, ds.labels())
}

/// Mean cross-entropy of `net` on `ds` in inference mode.
pub fn mean_loss(net: &Network, ds: &FrameDataset) -> Result<f64> {
    let infer = net.inference_network();
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = ds.batch(chunk)?;
        let (loss, _) = softmax_xent(&infer.logits(&x)?, &y)?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / ds.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub records: Vec<EpochRecord>,
    pub state: TrainState,
}

/// Runs epochs until the schedule stops or `max_epochs` is reached, and
/// returns the network holding the best snapshot.
pub fn train(
    net: Network,
    train_set: &FrameDataset,
    eval_set: &FrameDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(net, train_set, eval_set, cfg, |_, _| {})
}

/// [`train`] with a callback invoked after each epoch's schedule step.
pub fn train_with(
    mut net: Network,
    train_set: &FrameDataset,
    eval_set: &FrameDataset,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&Network, Option<&EpochRecord>),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || eval_set.is_empty() {
        return Err(Error::InvalidArgument(
            "training and evaluation sets must be nonempty".into(),
        ));
    }
    if net.output_width() != train_set.class_count() {
        return Err(Error::Config(format!(
            "network emits {} classes, dataset has {}",
            net.output_width(),
            train_set.class_count()
        )));
    }
    if net.input_layout().row_width() != train_set.dim() {
        return Err(Error::Config(format!(
            "network expects rows of {}, dataset rows have {}",
            net.input_layout().row_width(),
            train_set.dim()
        )));
    }

    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut state = TrainState::new(cfg, &net);
    let mut records = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let lr = state.lr;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = train_set.batch(chunk)?;
            let (logits, tape) = net.forward(&x, &mut Mode::Train(&mut rng))?;
            let (loss, grad) = softmax_xent(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            loss_sum += loss * chunk.len() as f64;
            let grads = net.backward(&tape, &grad)?;
            for (layer, g) in net.layers_mut().iter_mut().zip(&grads) {
                sgd_step(&mut layer.params_mut(), g, lr)?;
                if let (Some(c), Some(w)) = (cfg.max_norm, layer.incoming_weights_mut()) {
                    max_norm_project_in_place(w, c);
                }
            }
            on_step(&net, None);
        }
        let acc = evaluate(&net, eval_set)?;
        let record = EpochRecord {
            epoch,
            loss: loss_sum / train_set.len() as f64,
            acc,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!("epoch {epoch}: loss {:.4} acc {acc:.2}% lr {lr}", record.loss);
        let outcome = state.epoch_end_schedule(acc, &mut net)?;
        on_step(&net, Some(&record));
        records.push(record);
        if outcome == EpochOutcome::Stopped {
            break;
        }
    }
    net.restore(&state.best_weights)?;
    Ok(TrainOutcome {
        network: net,
        records,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::DenseLayer;
    use crate::network::{InputLayout, Layer};

    fn toy_net() -> Network {
        let mut rng = Rng::seed_from_u64(0);
        Network::new(
            InputLayout::Flat(2),
            vec![Layer::Dense(DenseLayer::init(2, 3, true, &mut rng))],
        )
        .unwrap()
    }

    #[test]
    fn sgd_cases() {
        let mut p = Tensor::from_slice(&[1.0]);
        sgd_step(&mut [&mut p], &[Tensor::from_slice(&[2.0])], 0.1).unwrap();
        assert!((p.data()[0] - 0.8).abs() < 1e-15);
        let before = p.clone();
        sgd_step(&mut [&mut p], &[Tensor::from_slice(&[5.0])], 0.0).unwrap();
        assert_eq!(p, before);
        assert!(sgd_step(&mut [&mut p], &[Tensor::zeros(&[2])], 0.1).is_err());
    }

    #[test]
    fn sgd_linearity() {
        let g1 = Tensor::from_slice(&[0.5, -1.0]);
        let g2 = Tensor::from_slice(&[0.25, 2.0]);
        let mut a = Tensor::from_slice(&[1.0, 1.0]);
        sgd_step(&mut [&mut a], std::slice::from_ref(&g1), 0.5).unwrap();
        sgd_step(&mut [&mut a], std::slice::from_ref(&g2), 0.5).unwrap();
        let mut b = Tensor::from_slice(&[1.0, 1.0]);
        let sum = g1.zip_map(&g2, |x, y| x + y).unwrap();
        sgd_step(&mut [&mut b], &[sum], 0.5).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn max_norm_cases() {
        let w = Tensor::from_rows(&[&[3.0, 4.0], &[0.3, 0.4], &[0.0, 0.0]]);
        let p = max_norm_project(&w, 2.5);
        assert_eq!(p.row(0), &[1.5, 2.0]);
        assert_eq!(p.row(1), w.row(1));
        assert_eq!(p.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(frame_accuracy(&[1, 2], &[1, 2]).unwrap(), 100.0);
        assert_eq!(frame_accuracy(&[0, 0], &[1, 2]).unwrap(), 0.0);
        assert_eq!(frame_accuracy(&[1, 0], &[1, 2]).unwrap(), 50.0);
        assert!(frame_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn monotone_accuracies_never_halve() {
        let mut net = toy_net();
        let mut st = TrainState::new(&TrainConfig::default(), &net);
        for acc in [80.0, 81.0, 82.0] {
            assert_eq!(st.epoch_end_schedule(acc, &mut net).unwrap(), EpochOutcome::Improved);
        }
        assert_eq!(st.lr, 0.1);
        assert_eq!(st.halvings, 0);
    }

    #[test]
    fn five_regressions_stop_at_lr_over_32() {
        let mut net = toy_net();
        let mut st = TrainState::new(&TrainConfig::default(), &net);
        st.epoch_end_schedule(50.0, &mut net).unwrap();
        for i in 0..5 {
            let out = st.epoch_end_schedule(40.0, &mut net).unwrap();
            assert_eq!(out == EpochOutcome::Stopped, i == 4);
        }
        assert!(st.stopped);
        assert_eq!(st.lr, 0.003125);
        assert!(matches!(st.epoch_end_schedule(90.0, &mut net), Err(Error::State(_))));
    }

    #[test]
    fn drop_then_improve_restores_and_continues() {
        let mut net = toy_net();
        let mut st = TrainState::new(&TrainConfig::default(), &net);
        st.epoch_end_schedule(60.0, &mut net).unwrap();
        let good = net.clone();
        for p in net.params_mut() {
            p.data_mut()[0] += 1.0;
        }
        assert_eq!(st.epoch_end_schedule(55.0, &mut net).unwrap(), EpochOutcome::Regressed);
        assert_eq!(st.lr, 0.05);
        assert_eq!(net, good);
        assert_eq!(st.epoch_end_schedule(61.0, &mut net).unwrap(), EpochOutcome::Improved);
        assert_eq!(st.lr, 0.05);
        assert!(!st.stopped);
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let net = toy_net();
        let ds = FrameDataset::new(vec![0.0, 1.0, 1.0, 0.0], 2, vec![0, 1], vec![0, 0], 3).unwrap();
        let cfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(net.clone(), &ds, &ds, &cfg).unwrap();
        assert_eq!(out.network, net);
        assert!(out.records.is_empty());
    }

    #[test]
    fn csv_append_writes_header_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let r = EpochRecord {
            epoch: 1,
            loss: 0.5,
            acc: 90.0,
            lr: 0.1,
            seconds: 1.25,
        };
        append_epoch_csv(&path, std::slice::from_ref(&r)).unwrap();
        append_epoch_csv(&path, &[r]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "epoch,loss,acc,lr,seconds\n1,0.5,90,0.1,1.250\n1,0.5,90,0.1,1.250\n"
        );
    }
}
