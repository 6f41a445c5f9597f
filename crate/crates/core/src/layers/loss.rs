use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over a batch of logits `[batch, classes]`.
///
/// Returns the loss and its gradient with respect to the logits,
/// `(softmax − onehot) / batch`.
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let &[batch, classes] = logits.shape() else {
        return Err(Error::InvalidArgument(format!(
            "logits must be [batch, classes], got {:?}",
            logits.shape()
        )));
    };
    if labels.len() != batch {
        return Err(Error::shape("softmax_xent", logits.shape(), &[labels.len()]));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let mut grad = Vec::with_capacity(batch * classes);
    let mut loss = 0.0;
    let inv_b = 1.0 / batch as f64;
    for (row, &label) in logits.data().chunks(classes).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_sum = sum.ln();
        // -log p(label) = log Σ exp(z - max) - (z_label - max)
        loss += log_sum - (row[label] - max);
        for (c, &z) in row.iter().enumerate() {
            let p = (z - max - log_sum).exp();
            let target = if c == label { 1.0 } else { 0.0 };
            grad.push((p - target) * inv_b);
        }
    }
    Ok((loss * inv_b, Tensor::new(&[batch, classes], grad)?))
}
