use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Numerically stable softmax of a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, with its gradient
/// `softmax(logits) - one_hot(label)`.
pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<(f64, Tensor)> {
    let (loss, grad) = cross_entropy_slice(logits.data(), label)?;
    Ok((loss, Tensor::from_vec(logits.shape(), grad)?))
}

pub(crate) fn cross_entropy_slice(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::InvalidLabel { label, classes: logits.len() });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let loss = -(logits[label] - max - log_total);
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss.max(0.0), grad))
}

/// Mean cross-entropy over a `[N, classes]` batch; the gradient is already
/// divided by `N`.
pub fn batch_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let &[n, classes] = logits.shape() else {
        return Err(Error::ShapeMismatch { context: "logits", expected: vec![labels.len(), 0], got: logits.shape().to_vec() });
    };
    if n != labels.len() {
        return Err(Error::ShapeMismatch { context: "labels", expected: vec![n], got: vec![labels.len()] });
    }
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(n * classes);
    for (row, &label) in logits.data().chunks(classes).zip(labels) {
        let (l, g) = cross_entropy_slice(row, label)?;
        total += l;
        grad.extend(g.into_iter().map(|v| v / n as f64));
    }
    Ok((total / n as f64, Tensor::from_vec(&[n, classes], grad)?))
}
