//! The intrusion-detection model: an MLP over encoded features exposing
//! predictions, accuracy, and input gradients for attack generation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{
    cross_entropy_loss, softmax, MlpConfig, MlpNetwork, OptimizerConfig, OptimizerState,
};
use crate::rng::Rng;
use crate::tensor::DenseTensor;

pub const NUM_CLASSES: usize = 2;

/// Hidden widths from the reference architecture.
pub fn paper_hidden_widths() -> Vec<usize> {
    vec![256, 512, 1024, 512, 256]
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassifierTrainConfig {
    /// Hidden widths; overriding the reference stack is recorded in the
    /// checkpoint by way of the config echo.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self {
            hidden: paper_hidden_widths(),
            epochs: 10_000,
            learning_rate: 1e-5,
            batch_size: 1024,
            seed: 0,
        }
    }
}

/// A frozen classifier; safe to share across threads for prediction and
/// gradient queries.
#[derive(Debug, Clone, PartialEq)]
pub struct IdsModel {
    net: MlpNetwork,
}

/// Loss driving [`IdsModel::input_gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossKind {
    CrossEntropy,
    /// MSE between softmax probabilities and the one-hot target.
    SquaredError,
}

impl IdsModel {
    pub fn from_network(net: MlpNetwork) -> Result<Self> {
        if net.output_width() != NUM_CLASSES {
            return Err(Error::InvalidParameter {
                context: "IdsModel",
                message: String::from("classifier must end in 2 logits"),
            });
        }
        if net.embed_injection() {
            return Err(Error::InvalidParameter {
                context: "IdsModel",
                message: String::from("classifier takes no timestep embedding"),
            });
        }
        Ok(Self { net })
    }

    pub fn network(&self) -> &MlpNetwork {
        &self.net
    }

    pub fn input_width(&self) -> usize {
        self.net.input_width()
    }

    pub fn logits(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.net.output(x, None)
    }

    /// Argmax labels and softmax probabilities.
    pub fn predict(&self, x: &DenseTensor) -> Result<(Vec<usize>, DenseTensor)> {
        let logits = self.logits(x)?;
        let probs = softmax(&logits);
        let labels = (0..probs.rows())
            .map(|r| {
                let row = probs.row(r);
                if row[1] > row[0] {
                    1
                } else {
                    0
                }
            })
            .collect();
        Ok((labels, probs))
    }

    pub fn accuracy_on(&self, x: &DenseTensor, labels: &[usize]) -> Result<f64> {
        if labels.len() != x.rows() {
            return Err(Error::ShapeMismatch {
                context: "accuracy",
                expected: (x.rows(), 1),
                actual: (labels.len(), 1),
            });
        }
        let (predicted, _) = self.predict(x)?;
        let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
        Ok(correct as f64 / labels.len() as f64)
    }

    pub fn accuracy(&self, dataset: &Dataset) -> Result<f64> {
        self.accuracy_on(&dataset.features, &dataset.labels)
    }

    /// Gradient of the mean loss toward `target_labels` with respect to each
    /// input element; same shape as `x`.
    pub fn input_gradient(
        &self,
        x: &DenseTensor,
        target_labels: &[usize],
        loss: LossKind,
    ) -> Result<DenseTensor> {
        let pass = self.net.forward(x, None)?;
        let logits = pass.output();
        let output_grad = match loss {
            LossKind::CrossEntropy => cross_entropy_loss(logits, target_labels)?.1,
            LossKind::SquaredError => {
                // d/dz of mean || softmax(z) - onehot ||^2 via the softmax
                // Jacobian: s .* (g - <g, s>) with g = 2 (s - y) / N
                let probs = softmax(logits);
                let n = (probs.rows() * probs.cols()) as f64;
                let mut grad = DenseTensor::zeros(probs.rows(), probs.cols());
                for r in 0..probs.rows() {
                    let label = target_labels.get(r).copied().ok_or(Error::ShapeMismatch {
                        context: "input_gradient",
                        expected: (probs.rows(), 1),
                        actual: (target_labels.len(), 1),
                    })?;
                    if label >= probs.cols() {
                        return Err(Error::LabelOutOfRange {
                            row: r,
                            label,
                            classes: probs.cols(),
                        });
                    }
                    let s = probs.row(r);
                    let g: Vec<f64> = (0..s.len())
                        .map(|c| 2.0 * (s[c] - if c == label { 1.0 } else { 0.0 }) / n)
                        .collect();
                    let dot: f64 = g.iter().zip(s).map(|(a, b)| a * b).sum();
                    for (c, out) in grad.row_mut(r).iter_mut().enumerate() {
                        *out = s[c] * (g[c] - dot);
                    }
                }
                grad
            }
        };
        let grads = self.net.backward(&pass, &output_grad)?;
        Ok(grads.input)
    }
}

/// Trains the classifier with Adam over cross-entropy; deterministic under
/// the config seed. Returns per-epoch mean losses for loss-curve plots.
pub fn train_classifier(
    train: &Dataset,
    config: &ClassifierTrainConfig,
) -> Result<(IdsModel, Vec<f64>)> {
    if train.rows() == 0 {
        return Err(Error::EmptyInput { context: "train_classifier" });
    }
    if config.epochs < 1 {
        return Err(Error::InvalidParameter {
            context: "train_classifier",
            message: String::from("epochs must be at least 1"),
        });
    }
    let (benign, malicious) = train.class_counts();
    if benign == 0 || malicious == 0 {
        return Err(Error::InvalidParameter {
            context: "train_classifier",
            message: String::from("training set must contain both classes"),
        });
    }

    let mut sizes = Vec::with_capacity(config.hidden.len() + 2);
    sizes.push(train.width());
    sizes.extend_from_slice(&config.hidden);
    sizes.push(NUM_CLASSES);

    let mut rng = Rng::seed_from_u64(config.seed);
    let mut net = MlpNetwork::init(&MlpConfig::plain(sizes), &mut rng)?;
    let mut optimizer = OptimizerState::new(OptimizerConfig::adam(config.learning_rate))?;

    let n = train.rows();
    let batch = config.batch_size.min(n).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let x = train.features.select_rows(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            let pass = net.forward(&x, None)?;
            let (loss, grad) = cross_entropy_loss(pass.output(), &labels)?;
            let grads = net.backward(&pass, &grad)?;
            optimizer.step(&mut net, &grads)?;
            epoch_loss += loss * chunk.len() as f64;
        }
        epoch_loss /= n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFinite {
                context: alloc::format!("classifier loss at epoch {epoch}"),
            });
        }
        loss_log.push(epoch_loss);
    }

    Ok((IdsModel::from_network(net)?, loss_log))
}
