//! Minimal dense-network engine with reverse-mode gradients.
//!
//! One [`MlpNetwork`] type serves both the intrusion classifier and the
//! diffusion noise predictor. Hidden layers are ReLU, the output layer is
//! linear. When timestep conditioning is enabled, an embedding vector is
//! projected to each hidden layer's width by a learned map and added to the
//! pre-activation.

pub mod embedding;
pub mod loss;
pub mod optimizer;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::Rng;
use crate::tensor::DenseTensor;

pub use embedding::{embedding_matrix, sinusoidal_embedding};
pub use loss::{cross_entropy_loss, mse_loss, softmax};
pub use optimizer::{OptimizerConfig, OptimizerKind, OptimizerState};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpConfig {
    /// Widths from input to output, e.g. `[41, 256, 256, 2]`.
    pub layer_sizes: Vec<usize>,
    /// Inject a projected timestep embedding into every hidden pre-activation.
    pub embed_injection: bool,
    /// Width of the raw embedding vector; ignored unless injection is on.
    pub embed_dim: usize,
}

impl MlpConfig {
    pub fn plain(layer_sizes: Vec<usize>) -> Self {
        Self { layer_sizes, embed_injection: false, embed_dim: 0 }
    }

    pub fn with_embedding(layer_sizes: Vec<usize>, embed_dim: usize) -> Self {
        Self { layer_sizes, embed_injection: true, embed_dim }
    }

    fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidParameter {
                context: "MlpConfig",
                message: String::from("need at least an input and an output width"),
            });
        }
        if self.layer_sizes.iter().any(|&w| w == 0) {
            return Err(Error::InvalidParameter {
                context: "MlpConfig",
                message: String::from("zero-width layer"),
            });
        }
        if self.embed_injection && self.embed_dim == 0 {
            return Err(Error::InvalidParameter {
                context: "MlpConfig",
                message: String::from("embed_injection requires embed_dim > 0"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Shape `(in_width, out_width)`.
    pub weights: DenseTensor,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    layers: Vec<DenseLayer>,
    embed_dim: usize,
    /// One `(embed_dim, hidden_width)` map per hidden layer when conditioning
    /// is enabled.
    embed_projections: Option<Vec<DenseTensor>>,
}

/// Activations captured by [`MlpNetwork::forward`]; index 0 is the input.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub activations: Vec<DenseTensor>,
    pub embed: Option<DenseTensor>,
}

impl ForwardPass {
    pub fn output(&self) -> &DenseTensor {
        self.activations.last().expect("forward pass always has activations")
    }
}

/// Parameter gradients mirroring the network layout, plus the input gradient
/// needed by attack generation.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
    pub embed_projections: Option<Vec<DenseTensor>>,
    pub input: DenseTensor,
}

impl MlpNetwork {
    /// Uniform init in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(config: &MlpConfig, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        for layer in &mut net.layers {
            let (fan_in, fan_out) = layer.weights.shape();
            let bound = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            for w in layer.weights.data_mut() {
                *w = rng.uniform_range(-bound, bound);
            }
        }
        if let Some(projections) = &mut net.embed_projections {
            for p in projections {
                let (fan_in, fan_out) = p.shape();
                let bound = math::sqrt(6.0 / (fan_in + fan_out) as f64);
                for w in p.data_mut() {
                    *w = rng.uniform_range(-bound, bound);
                }
            }
        }
        Ok(net)
    }

    pub fn zeros(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let sizes = &config.layer_sizes;
        let layers = (0..sizes.len() - 1)
            .map(|l| DenseLayer {
                weights: DenseTensor::zeros(sizes[l], sizes[l + 1]),
                bias: alloc::vec![0.0; sizes[l + 1]],
            })
            .collect();
        let embed_projections = config.embed_injection.then(|| {
            (0..sizes.len() - 2)
                .map(|l| DenseTensor::zeros(config.embed_dim, sizes[l + 1]))
                .collect()
        });
        Ok(Self {
            layer_sizes: sizes.clone(),
            layers,
            embed_dim: if config.embed_injection { config.embed_dim } else { 0 },
            embed_projections,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn embed_injection(&self) -> bool {
        self.embed_projections.is_some()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn embed_projections(&self) -> Option<&[DenseTensor]> {
        self.embed_projections.as_deref()
    }

    fn hidden_count(&self) -> usize {
        self.layers.len() - 1
    }

    /// Runs the network, recording every post-activation.
    ///
    /// `embed` must be a `(batch, embed_dim)` tensor exactly when the network
    /// was built with embedding injection, and absent otherwise.
    pub fn forward(&self, x: &DenseTensor, embed: Option<&DenseTensor>) -> Result<ForwardPass> {
        if x.cols() != self.input_width() {
            return Err(Error::ShapeMismatch {
                context: "forward: input width",
                expected: (x.rows(), self.input_width()),
                actual: x.shape(),
            });
        }
        match (self.embed_projections.is_some(), embed) {
            (true, None) => {
                return Err(Error::InvalidParameter {
                    context: "forward",
                    message: String::from("network expects a timestep embedding"),
                })
            }
            (false, Some(_)) => {
                return Err(Error::InvalidParameter {
                    context: "forward",
                    message: String::from("network does not take a timestep embedding"),
                })
            }
            (true, Some(e)) => {
                if e.shape() != (x.rows(), self.embed_dim) {
                    return Err(Error::ShapeMismatch {
                        context: "forward: embedding",
                        expected: (x.rows(), self.embed_dim),
                        actual: e.shape(),
                    });
                }
            }
            (false, None) => {}
        }

        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        let mut current = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = current.matmul(&layer.weights)?;
            for row in 0..z.rows() {
                let r = z.row_mut(row);
                for (v, b) in r.iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            if l < self.hidden_count() {
                if let (Some(projections), Some(e)) = (&self.embed_projections, embed) {
                    let injected = e.matmul(&projections[l])?;
                    z.add_assign(&injected)?;
                }
                // ReLU
                for v in z.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            activations.push(z.clone());
            current = z;
        }
        Ok(ForwardPass { activations, embed: embed.cloned() })
    }

    /// Final activation only.
    pub fn output(&self, x: &DenseTensor, embed: Option<&DenseTensor>) -> Result<DenseTensor> {
        let pass = self.forward(x, embed)?;
        Ok(pass.activations.into_iter().last().expect("non-empty"))
    }

    /// Backpropagates `output_grad` through a recorded pass.
    ///
    /// Returns parameter gradients in the network's layout plus the gradient
    /// with respect to the input rows.
    pub fn backward(&self, pass: &ForwardPass, output_grad: &DenseTensor) -> Result<Gradients> {
        if pass.activations.len() != self.layers.len() + 1 {
            return Err(Error::InvalidParameter {
                context: "backward",
                message: format!(
                    "pass has {} activations, network has {} layers",
                    pass.activations.len(),
                    self.layers.len()
                ),
            });
        }
        for (l, act) in pass.activations.iter().enumerate() {
            if act.cols() != self.layer_sizes[l] {
                return Err(Error::ShapeMismatch {
                    context: "backward: stale activations",
                    expected: (act.rows(), self.layer_sizes[l]),
                    actual: act.shape(),
                });
            }
        }
        let last = pass.output();
        if output_grad.shape() != last.shape() {
            return Err(Error::ShapeMismatch {
                context: "backward: output gradient",
                expected: last.shape(),
                actual: output_grad.shape(),
            });
        }

        let mut layer_grads: Vec<Option<DenseLayer>> = alloc::vec![None; self.layers.len()];
        let mut proj_grads: Option<Vec<DenseTensor>> = self
            .embed_projections
            .as_ref()
            .map(|ps| ps.iter().map(|p| DenseTensor::zeros(p.rows(), p.cols())).collect());

        let mut delta = output_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let input_act = &pass.activations[l];
            let d_weights = input_act.transpose_matmul(&delta)?;
            let mut d_bias = alloc::vec![0.0; self.layer_sizes[l + 1]];
            for row in 0..delta.rows() {
                for (b, v) in d_bias.iter_mut().zip(delta.row(row)) {
                    *b += v;
                }
            }
            if l < self.hidden_count() {
                if let (Some(grads), Some(e)) = (&mut proj_grads, &pass.embed) {
                    grads[l] = e.transpose_matmul(&delta)?;
                }
            }
            layer_grads[l] = Some(DenseLayer { weights: d_weights, bias: d_bias });

            let mut d_input = delta.matmul_transpose_b(&self.layers[l].weights)?;
            if l > 0 {
                // activations[l] is a ReLU output; its zeros block the gradient
                let gate = &pass.activations[l];
                for row in 0..d_input.rows() {
                    let g = gate.row(row);
                    for (v, &a) in d_input.row_mut(row).iter_mut().zip(g) {
                        if a <= 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
            delta = d_input;
        }

        Ok(Gradients {
            layers: layer_grads.into_iter().map(|g| g.expect("filled")).collect(),
            embed_projections: proj_grads,
            input: delta,
        })
    }

    /// Visits `(name, applies_weight_decay, values)` for every parameter
    /// segment, in checkpoint order: per layer weights then bias, then the
    /// embedding projections.
    pub fn visit_segments(&self, mut f: impl FnMut(String, bool, &[f64])) {
        for (l, layer) in self.layers.iter().enumerate() {
            f(format!("layer{l}.weights"), true, layer.weights.data());
            f(format!("layer{l}.bias"), false, &layer.bias);
        }
        if let Some(projections) = &self.embed_projections {
            for (l, p) in projections.iter().enumerate() {
                f(format!("embed_projection{l}"), true, p.data());
            }
        }
    }

    pub fn visit_segments_mut(&mut self, mut f: impl FnMut(String, bool, &mut [f64])) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            f(format!("layer{l}.weights"), true, layer.weights.data_mut());
            f(format!("layer{l}.bias"), false, &mut layer.bias);
        }
        if let Some(projections) = &mut self.embed_projections {
            for (l, p) in projections.iter_mut().enumerate() {
                f(format!("embed_projection{l}"), true, p.data_mut());
            }
        }
    }

    /// Replaces all parameters from flat segments in `visit_segments` order.
    pub fn load_segments(&mut self, segments: &[Vec<f64>]) -> Result<()> {
        let mut expected = 0usize;
        self.visit_segments(|_, _, _| expected += 1);
        if segments.len() != expected {
            return Err(Error::InvalidParameter {
                context: "load_segments",
                message: format!("expected {expected} segments, got {}", segments.len()),
            });
        }
        let mut idx = 0;
        let mut bad: Option<String> = None;
        self.visit_segments_mut(|name, _, values| {
            let src = &segments[idx];
            if src.len() != values.len() {
                bad.get_or_insert(name);
            } else {
                values.copy_from_slice(src);
            }
            idx += 1;
        });
        match bad {
            Some(name) => Err(Error::InvalidParameter {
                context: "load_segments",
                message: format!("segment {name} has the wrong length"),
            }),
            None => Ok(()),
        }
    }
}

impl Gradients {
    /// Flat segments in the same order as [`MlpNetwork::visit_segments`].
    pub fn segments(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.weights"), layer.weights.data()));
            out.push((format!("layer{l}.bias"), layer.bias.as_slice()));
        }
        if let Some(projections) = &self.embed_projections {
            for (l, p) in projections.iter().enumerate() {
                out.push((format!("embed_projection{l}"), p.data()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_network_maps_everything_to_zero() {
        let net = MlpNetwork::zeros(&MlpConfig::plain(vec![3, 4, 2])).unwrap();
        let x = DenseTensor::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]).unwrap();
        let out = net.output(&x, None).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net = MlpNetwork::zeros(&MlpConfig::plain(vec![3, 3])).unwrap();
        let mut segs: Vec<Vec<f64>> = Vec::new();
        net.visit_segments(|_, _, v| segs.push(v.to_vec()));
        // single linear layer: set weights to I
        segs[0] = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        net.load_segments(&segs).unwrap();
        let x = DenseTensor::from_vec(2, 3, vec![0.1, -0.2, 0.3, 1.0, 2.0, -3.0]).unwrap();
        let out = net.output(&x, None).unwrap();
        assert_eq!(out.data(), x.data());
    }

    // Frozen oracle: explicit per-element arithmetic on a 3->2->2 network,
    // computed independently before this module existed.
    #[test]
    fn forward_matches_hand_computed_two_layer_case() {
        let mut net = MlpNetwork::zeros(&MlpConfig::plain(vec![3, 2, 2])).unwrap();
        let segs = vec![
            vec![0.2, -0.4, 0.7, 0.1, -0.3, 0.5], // w0 (3x2)
            vec![0.05, -0.2],                     // b0
            vec![1.0, -0.5, 0.25, 0.75],          // w1 (2x2)
            vec![-0.1, 0.3],                      // b1
        ];
        net.load_segments(&segs).unwrap();
        let x =
            DenseTensor::from_vec(2, 3, vec![0.5, -1.0, 2.0, 1.5, 0.25, -0.75]).unwrap();
        let pass = net.forward(&x, None).unwrap();
        let hidden = &pass.activations[1];
        let out = pass.output();
        let expect_hidden = [0.0, 0.5, 0.75, 0.0];
        let expect_out = [0.025, 0.675, 0.65, -0.075];
        for (got, want) in hidden.data().iter().zip(expect_hidden) {
            assert!((got - want).abs() < 1e-12, "hidden {got} vs {want}");
        }
        for (got, want) in out.data().iter().zip(expect_out) {
            assert!((got - want).abs() < 1e-12, "out {got} vs {want}");
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = Rng::seed_from_u64(3);
        let net = MlpNetwork::init(&MlpConfig::plain(vec![4, 5, 3]), &mut rng).unwrap();
        let x = rng.normal_tensor(3, 4);
        let pass = net.forward(&x, None).unwrap();
        let grads = net.backward(&pass, &DenseTensor::zeros(3, 3)).unwrap();
        grads.visit_segments(|name, values| {
            assert!(values.iter().all(|&v| v == 0.0), "{name} not zero");
        });
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_input_grad_is_grad_times_w_transposed() {
        let mut rng = Rng::seed_from_u64(11);
        let net = MlpNetwork::init(&MlpConfig::plain(vec![3, 2]), &mut rng).unwrap();
        let x = rng.normal_tensor(4, 3);
        let g = rng.normal_tensor(4, 2);
        let pass = net.forward(&x, None).unwrap();
        let grads = net.backward(&pass, &g).unwrap();
        let expect = g.matmul_transpose_b(&net.layers()[0].weights).unwrap();
        for (a, b) in grads.input.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = MlpNetwork::zeros(&MlpConfig::plain(vec![3, 2])).unwrap();
        let x = DenseTensor::zeros(2, 4);
        match net.output(&x, None) {
            Err(Error::ShapeMismatch { .. }) => {}
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn embedding_is_required_exactly_when_configured() {
        let mut rng = Rng::seed_from_u64(5);
        let plain = MlpNetwork::init(&MlpConfig::plain(vec![3, 4, 3]), &mut rng).unwrap();
        let conditioned =
            MlpNetwork::init(&MlpConfig::with_embedding(vec![3, 4, 3], 6), &mut rng).unwrap();
        let x = rng.normal_tensor(2, 3);
        let e = rng.normal_tensor(2, 6);
        assert!(plain.forward(&x, Some(&e)).is_err());
        assert!(conditioned.forward(&x, None).is_err());
        assert!(conditioned.forward(&x, Some(&e)).is_ok());
    }
}
