//! Training losses with their gradients.

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::DenseTensor;

/// Mean squared error over all elements; gradient is `2(pred - target)/N`.
pub fn mse_loss(pred: &DenseTensor, target: &DenseTensor) -> Result<(f64, DenseTensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            context: "mse_loss",
            expected: pred.shape(),
            actual: target.shape(),
        });
    }
    let n = (pred.rows() * pred.cols()) as f64;
    let mut grad = DenseTensor::zeros(pred.rows(), pred.cols());
    let mut sum = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        sum += d * d;
        *g = 2.0 * d / n;
    }
    Ok((sum / n, grad))
}

/// Row-wise softmax, stabilized by max subtraction.
pub fn softmax(logits: &DenseTensor) -> DenseTensor {
    let mut out = DenseTensor::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dst = out.row_mut(r);
        let mut sum = 0.0;
        for (d, &v) in dst.iter_mut().zip(row) {
            let e = math::exp(v - max);
            *d = e;
            sum += e;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    out
}

/// Softmax + negative log likelihood, mean over rows; gradient w.r.t. logits.
pub fn cross_entropy_loss(logits: &DenseTensor, labels: &[usize]) -> Result<(f64, DenseTensor)> {
    if labels.len() != logits.rows() {
        return Err(Error::ShapeMismatch {
            context: "cross_entropy_loss",
            expected: (logits.rows(), 1),
            actual: (labels.len(), 1),
        });
    }
    let classes = logits.cols();
    for (row, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::LabelOutOfRange { row, label, classes });
        }
    }
    let n = logits.rows() as f64;
    let probs = softmax(logits);
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (r, &label) in labels.iter().enumerate() {
        let p = probs.get(r, label).max(f64::MIN_POSITIVE);
        loss -= math::ln(p);
        let g = grad.row_mut(r);
        g[label] -= 1.0;
        for v in g.iter_mut() {
            *v /= n;
        }
    }
    Ok((loss / n, grad))
}
