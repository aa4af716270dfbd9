//! Adam and AdamW with bias correction.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::nn::{Gradients, MlpNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OptimizerKind {
    Adam,
    /// Decoupled weight decay, applied to weights and projections but never
    /// to biases.
    AdamW,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }

    pub fn adamw(learning_rate: f64, weight_decay: f64) -> Self {
        Self { kind: OptimizerKind::AdamW, weight_decay, ..Self::adam(learning_rate) }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: OptimizerConfig,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        if config.learning_rate <= 0.0 {
            return Err(Error::InvalidParameter {
                context: "OptimizerState",
                message: String::from("learning rate must be positive"),
            });
        }
        Ok(Self { config, step_count: 0, first_moment: Vec::new(), second_moment: Vec::new() })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// One update over every parameter segment of `net`.
    ///
    /// Moment buffers are allocated on the first call and must keep matching
    /// shapes afterwards. Non-finite gradients abort with the segment name.
    pub fn step(&mut self, net: &mut MlpNetwork, grads: &Gradients) -> Result<()> {
        let grad_segments = grads.segments();

        for (name, values) in &grad_segments {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { context: alloc::format!("gradient of {name}") });
            }
        }

        if self.first_moment.is_empty() {
            self.first_moment = grad_segments.iter().map(|(_, v)| vec![0.0; v.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != grad_segments.len() {
            return Err(Error::InvalidParameter {
                context: "optimizer step",
                message: String::from("gradient layout changed between steps"),
            });
        }

        self.step_count += 1;
        let cfg = &self.config;
        let bias1 = 1.0 - math::powf(cfg.beta1, self.step_count as f64);
        let bias2 = 1.0 - math::powf(cfg.beta2, self.step_count as f64);

        let mut idx = 0;
        let mut status: Result<()> = Ok(());
        let (first, second) = (&mut self.first_moment, &mut self.second_moment);
        net.visit_segments_mut(|name, decays, params| {
            if status.is_err() {
                return;
            }
            let (grad_name, grad) = &grad_segments[idx];
            if grad_name != &name || grad.len() != params.len() {
                status = Err(Error::InvalidParameter {
                    context: "optimizer step",
                    message: alloc::format!("gradient segment {grad_name} does not match {name}"),
                });
                return;
            }
            let m = &mut first[idx];
            let v = &mut second[idx];
            let decay = if cfg.kind == OptimizerKind::AdamW && decays {
                cfg.weight_decay
            } else {
                0.0
            };
            for i in 0..params.len() {
                let g = grad[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                if decay > 0.0 {
                    params[i] -= cfg.learning_rate * decay * params[i];
                }
                params[i] -= cfg.learning_rate * m_hat / (math::sqrt(v_hat) + cfg.eps);
            }
            if params.iter().any(|p| !p.is_finite()) {
                status = Err(Error::NonFinite { context: alloc::format!("parameters of {name}") });
            }
            idx += 1;
        });
        status
    }
}
