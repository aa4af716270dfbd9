//! Denoising diffusion over feature vectors: variance schedules, the forward
//! noising process, ε-prediction training, reverse denoising, and the
//! purification operation that strips adversarial perturbations.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math;
use crate::nn::{embedding_matrix, mse_loss, MlpConfig, MlpNetwork, OptimizerConfig, OptimizerState};
use crate::rng::Rng;
use crate::tensor::DenseTensor;

/// β sequence with the derived α, ᾱ and σ² sequences.
///
/// Indexing is 1-based to match the process definition: `beta(1)` is the
/// first step's variance. σ²_t = 1 − ᾱ_t is stored, never recomputed, so
/// `alpha_bar(t) + sigma2(t) == 1.0` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma2: Vec<f64>,
}

/// Parameters that regenerate a linear schedule bit-exactly:
/// `β_i = β₁ + (i−1)(β_T−β₁)/(T−1)`, and `β = [β₁]` when `T = 1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleSpec {
    pub t_count: usize,
    pub beta1: f64,
    pub beta_t: f64,
}

impl VarianceSchedule {
    /// `T` evenly spaced β values; `beta1 == beta_t` gives a constant
    /// schedule.
    pub fn linear(t_count: usize, beta1: f64, beta_t: f64) -> Result<Self> {
        if t_count < 1 {
            return Err(Error::InvalidParameter {
                context: "VarianceSchedule::linear",
                message: String::from("T must be at least 1"),
            });
        }
        if !(beta1 > 0.0 && beta1 <= beta_t && beta_t < 1.0) {
            return Err(Error::InvalidParameter {
                context: "VarianceSchedule::linear",
                message: format!("need 0 < beta1 <= betaT < 1, got ({beta1}, {beta_t})"),
            });
        }
        let beta: Vec<f64> = if t_count == 1 {
            vec![beta1]
        } else {
            (0..t_count)
                .map(|i| beta1 + i as f64 * (beta_t - beta1) / (t_count - 1) as f64)
                .collect()
        };
        Ok(Self::from_beta(beta))
    }

    pub fn from_spec(spec: &ScheduleSpec) -> Result<Self> {
        Self::linear(spec.t_count, spec.beta1, spec.beta_t)
    }

    fn from_beta(beta: Vec<f64>) -> Self {
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(beta.len());
        let mut product = 1.0;
        for a in &alpha {
            product *= a;
            alpha_bar.push(product);
        }
        let sigma2 = alpha_bar.iter().map(|ab| 1.0 - ab).collect();
        Self { beta, alpha, alpha_bar, sigma2 }
    }

    pub fn t_count(&self) -> usize {
        self.beta.len()
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.t_count() {
            return Err(Error::StepOutOfRange { t, max: self.t_count() });
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        Ok(self.beta[t - 1])
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        Ok(self.alpha[t - 1])
    }

    /// ᾱ_t = Π_{i≤t} (1 − β_i); ᾱ₀ is defined as 1.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Ok(1.0);
        }
        self.check_step(t)?;
        Ok(self.alpha_bar[t - 1])
    }

    /// The total noise variance composed over `t` steps: σ²_t = 1 − ᾱ_t.
    pub fn composed_variance(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        Ok(self.sigma2[t - 1])
    }

    /// Posterior variance β̃_t = β_t (1 − ᾱ_{t−1}) / (1 − ᾱ_t), with ᾱ₀ = 1.
    pub fn posterior_variance(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        let prev = self.alpha_bar(t - 1)?;
        Ok(self.beta[t - 1] * (1.0 - prev) / (1.0 - self.alpha_bar[t - 1]))
    }
}

/// Single-shot sample of the forward marginal:
/// `x_t = √ᾱ_t x₀ + √(1 − ᾱ_t) ε`.
pub fn forward_sample(
    x0: &DenseTensor,
    t: usize,
    schedule: &VarianceSchedule,
    rng: &mut Rng,
) -> Result<DenseTensor> {
    let noise = rng.normal_tensor(x0.rows(), x0.cols());
    forward_sample_with_noise(x0, t, schedule, &noise)
}

/// Same, with the Gaussian draw injected (for tests and reproducibility).
pub fn forward_sample_with_noise(
    x0: &DenseTensor,
    t: usize,
    schedule: &VarianceSchedule,
    noise: &DenseTensor,
) -> Result<DenseTensor> {
    if noise.shape() != x0.shape() {
        return Err(Error::ShapeMismatch {
            context: "forward_sample",
            expected: x0.shape(),
            actual: noise.shape(),
        });
    }
    if t == 0 {
        return Ok(x0.clone());
    }
    let alpha_bar = schedule.alpha_bar(t)?;
    let signal = math::sqrt(alpha_bar);
    let spread = math::sqrt(1.0 - alpha_bar);
    let mut out = x0.scale(signal);
    out.add_scaled_assign(noise, spread)?;
    Ok(out)
}

/// Forward sample where every row gets its own step index; used in training.
fn forward_sample_per_row(
    x0: &DenseTensor,
    steps: &[usize],
    schedule: &VarianceSchedule,
    noise: &DenseTensor,
) -> Result<DenseTensor> {
    let mut out = DenseTensor::zeros(x0.rows(), x0.cols());
    for r in 0..x0.rows() {
        let alpha_bar = schedule.alpha_bar(steps[r])?;
        let signal = math::sqrt(alpha_bar);
        let spread = math::sqrt(1.0 - alpha_bar);
        for ((o, &x), &e) in out.row_mut(r).iter_mut().zip(x0.row(r)).zip(noise.row(r)) {
            *o = signal * x + spread * e;
        }
    }
    Ok(out)
}

/// `t` iterated single-step transitions
/// `x_{i+1} = √(1 − β_{i+1}) x_i + √β_{i+1} ε`; marginally equivalent to
/// [`forward_sample`], kept distinct so the equivalence can be tested.
pub fn forward_chain(
    x0: &DenseTensor,
    t: usize,
    schedule: &VarianceSchedule,
    rng: &mut Rng,
) -> Result<DenseTensor> {
    if t > schedule.t_count() {
        return Err(Error::StepOutOfRange { t, max: schedule.t_count() });
    }
    let mut x = x0.clone();
    for step in 1..=t {
        let beta = schedule.beta(step)?;
        let keep = math::sqrt(1.0 - beta);
        let spread = math::sqrt(beta);
        for v in x.data_mut() {
            *v = keep * *v + spread * rng.normal();
        }
    }
    Ok(x)
}

/// Which variance drives the reverse-step noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ReverseVariance {
    /// β̃_t = β_t (1 − ᾱ_{t−1}) / (1 − ᾱ_t); the default.
    Posterior,
    /// Plain β_t, kept for ablation.
    Beta,
}

/// A trained noise predictor bound to its schedule.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    schedule: VarianceSchedule,
    noise_net: MlpNetwork,
    embed_dim: usize,
    reverse_variance: ReverseVariance,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiffusionTrainConfig {
    /// Hidden widths of the noise predictor.
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub weight_decay: f64,
    pub seed: u64,
    /// Epoch interval between loss-log entries.
    pub log_interval: usize,
    pub reverse_variance: ReverseVariance,
}

impl Default for DiffusionTrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![960; 10],
            embed_dim: 128,
            epochs: 200_000,
            learning_rate: 1e-4,
            batch_size: None,
            weight_decay: 1e-2,
            seed: 0,
            log_interval: 100,
            reverse_variance: ReverseVariance::Posterior,
        }
    }
}

impl DiffusionModel {
    pub fn new(
        schedule: VarianceSchedule,
        noise_net: MlpNetwork,
        reverse_variance: ReverseVariance,
    ) -> Result<Self> {
        if noise_net.input_width() != noise_net.output_width() {
            return Err(Error::InvalidParameter {
                context: "DiffusionModel",
                message: String::from("noise net must map features to features"),
            });
        }
        if !noise_net.embed_injection() {
            return Err(Error::InvalidParameter {
                context: "DiffusionModel",
                message: String::from("noise net must take a timestep embedding"),
            });
        }
        let embed_dim = noise_net.embed_dim();
        Ok(Self { schedule, noise_net, embed_dim, reverse_variance })
    }

    pub fn schedule(&self) -> &VarianceSchedule {
        &self.schedule
    }

    pub fn noise_net(&self) -> &MlpNetwork {
        &self.noise_net
    }

    pub fn reverse_variance(&self) -> ReverseVariance {
        self.reverse_variance
    }

    pub fn feature_width(&self) -> usize {
        self.noise_net.input_width()
    }

    /// ε̂ for a batch sharing one step index.
    pub fn predict_noise(&self, x_t: &DenseTensor, t: usize) -> Result<DenseTensor> {
        let steps = vec![t; x_t.rows()];
        let embed = embedding_matrix(&steps, self.embed_dim)?;
        self.noise_net.output(x_t, Some(&embed))
    }

    /// One reverse transition `x_t -> x_{t-1}`.
    ///
    /// The Gaussian term is dropped at `t = 1`, making the last step
    /// deterministic given ε̂.
    pub fn reverse_step(&self, x_t: &DenseTensor, t: usize, rng: &mut Rng) -> Result<DenseTensor> {
        let eps_hat = self.predict_noise(x_t, t)?;
        let noise = if t > 1 {
            Some(rng.normal_tensor(x_t.rows(), x_t.cols()))
        } else {
            None
        };
        reverse_step_mean(&self.schedule, x_t, t, &eps_hat, noise.as_ref(), self.reverse_variance)
    }

    /// `t` forward steps then `t` reverse steps; `t = 0` is the identity.
    /// Output is clamped to the `[0,1]` data domain.
    pub fn purify(&self, x: &DenseTensor, t: usize, rng: &mut Rng) -> Result<DenseTensor> {
        if x.cols() != self.feature_width() {
            return Err(Error::ShapeMismatch {
                context: "purify",
                expected: (x.rows(), self.feature_width()),
                actual: x.shape(),
            });
        }
        if t == 0 {
            return Ok(x.clone());
        }
        if t > self.schedule.t_count() {
            return Err(Error::StepOutOfRange { t, max: self.schedule.t_count() });
        }
        let mut current = forward_sample(x, t, &self.schedule, rng)?;
        for step in (1..=t).rev() {
            current = self.reverse_step(&current, step, rng)?;
        }
        current.clamp_in_place(0.0, 1.0);
        Ok(current)
    }
}

/// The reverse-transition algebra, exposed for testing against identities:
/// `x_{t−1} = (x_t − (β_t/√(1−ᾱ_t)) ε̂) / √α_t + √variance · z`.
pub fn reverse_step_mean(
    schedule: &VarianceSchedule,
    x_t: &DenseTensor,
    t: usize,
    eps_hat: &DenseTensor,
    noise: Option<&DenseTensor>,
    variance: ReverseVariance,
) -> Result<DenseTensor> {
    schedule.check_step(t)?;
    if eps_hat.shape() != x_t.shape() {
        return Err(Error::ShapeMismatch {
            context: "reverse_step",
            expected: x_t.shape(),
            actual: eps_hat.shape(),
        });
    }
    let beta = schedule.beta(t)?;
    let alpha = schedule.alpha(t)?;
    let alpha_bar = schedule.alpha_bar(t)?;
    let eps_coeff = beta / math::sqrt(1.0 - alpha_bar);
    let inv_sqrt_alpha = 1.0 / math::sqrt(alpha);

    let mut out = x_t.clone();
    out.add_scaled_assign(eps_hat, -eps_coeff)?;
    let mut out = out.scale(inv_sqrt_alpha);

    if t > 1 {
        if let Some(z) = noise {
            let var = match variance {
                ReverseVariance::Posterior => schedule.posterior_variance(t)?,
                ReverseVariance::Beta => beta,
            };
            out.add_scaled_assign(z, math::sqrt(var))?;
        }
    }
    Ok(out)
}

/// Trains an ε predictor: per epoch, every instance draws its own step
/// `t ~ U{1..T}` and noise `ε ~ N(0, I)`, and the network regresses ε from
/// `(x_t, t)` under MSE.
pub fn train_diffusion(
    train: &Dataset,
    schedule: VarianceSchedule,
    config: &DiffusionTrainConfig,
) -> Result<(DiffusionModel, Vec<(usize, f64)>)> {
    if train.rows() == 0 {
        return Err(Error::EmptyInput { context: "train_diffusion" });
    }
    if config.epochs < 1 {
        return Err(Error::InvalidParameter {
            context: "train_diffusion",
            message: String::from("epochs must be at least 1"),
        });
    }
    let width = train.width();
    let mut sizes = Vec::with_capacity(config.hidden.len() + 2);
    sizes.push(width);
    sizes.extend_from_slice(&config.hidden);
    sizes.push(width);

    let mut rng = Rng::seed_from_u64(config.seed);
    let net_config = MlpConfig::with_embedding(sizes, config.embed_dim);
    let mut net = MlpNetwork::init(&net_config, &mut rng)?;
    let mut optimizer = OptimizerState::new(OptimizerConfig::adamw(
        config.learning_rate,
        config.weight_decay,
    ))?;

    let t_count = schedule.t_count();
    let n = train.rows();
    let batch = config.batch_size.unwrap_or(n).min(n).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_log = Vec::new();

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(batch) {
            let x0 = train.features.select_rows(chunk);
            let steps: Vec<usize> = chunk.iter().map(|_| 1 + rng.below(t_count)).collect();
            let noise = rng.normal_tensor(x0.rows(), x0.cols());
            let x_t = forward_sample_per_row(&x0, &steps, &schedule, &noise)?;
            let embed = embedding_matrix(&steps, config.embed_dim)?;

            let pass = net.forward(&x_t, Some(&embed))?;
            let (loss, grad) = mse_loss(pass.output(), &noise)?;
            let grads = net.backward(&pass, &grad)?;
            optimizer.step(&mut net, &grads)?;

            epoch_loss += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        epoch_loss /= seen as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFinite { context: format!("diffusion loss at epoch {epoch}") });
        }
        if epoch % config.log_interval.max(1) == 0 || epoch + 1 == config.epochs {
            loss_log.push((epoch, epoch_loss));
        }
    }

    let model = DiffusionModel::new(schedule, net, config.reverse_variance)?;
    Ok((model, loss_log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{fit_encoder, synthetic_blobs, transform, BlobConfig, FeatureSchema};

    fn blob_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = Rng::seed_from_u64(seed);
        let config = BlobConfig { dim: 2, separation: 0.4, noise_std: 0.05 };
        let records = synthetic_blobs(&config, n, &mut rng);
        let schema = FeatureSchema::numeric(2);
        let enc = fit_encoder(&records, &schema).unwrap();
        transform(&records, &enc).unwrap()
    }

    #[test]
    fn linear_schedule_endpoints_match_standard_parameters() {
        let s = VarianceSchedule::linear(1000, 1e-4, 0.02).unwrap();
        assert_eq!(s.beta(1).unwrap(), 1e-4);
        assert!((s.beta(1000).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(s.t_count(), 1000);
    }

    #[test]
    fn single_step_schedule() {
        let s = VarianceSchedule::linear(1, 0.5, 0.5).unwrap();
        assert_eq!(s.beta(1).unwrap(), 0.5);
        assert_eq!(s.t_count(), 1);
    }

    #[test]
    fn constant_schedule_products() {
        let s = VarianceSchedule::linear(3, 0.1, 0.1).unwrap();
        let expect_ab = [0.9, 0.81, 0.729];
        let expect_s2 = [0.1, 0.19, 0.271];
        for t in 1..=3 {
            assert!((s.alpha_bar(t).unwrap() - expect_ab[t - 1]).abs() < 1e-12);
            assert!((s.composed_variance(t).unwrap() - expect_s2[t - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn composed_variance_is_exactly_one_minus_alpha_bar() {
        let s = VarianceSchedule::linear(1000, 1e-4, 0.02).unwrap();
        for t in 1..=1000 {
            let sum = s.alpha_bar(t).unwrap() + s.composed_variance(t).unwrap();
            assert_eq!(sum, 1.0, "t = {t}");
        }
        assert!((s.composed_variance(1).unwrap() - 1e-4).abs() < 1e-18);
        assert!(s.composed_variance(1000).unwrap() > 0.999);
    }

    #[test]
    fn schedule_monotonicity() {
        let s = VarianceSchedule::linear(500, 1e-4, 0.05).unwrap();
        for t in 2..=500 {
            assert!(s.alpha_bar(t).unwrap() < s.alpha_bar(t - 1).unwrap());
            assert!(s.composed_variance(t).unwrap() > s.composed_variance(t - 1).unwrap());
            let s2 = s.composed_variance(t).unwrap();
            assert!(s2 > 0.0 && s2 < 1.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(VarianceSchedule::linear(0, 1e-4, 0.02).is_err());
        assert!(VarianceSchedule::linear(10, 0.0, 0.02).is_err());
        assert!(VarianceSchedule::linear(10, 0.03, 0.02).is_err());
        assert!(VarianceSchedule::linear(10, 0.5, 1.0).is_err());
        let s = VarianceSchedule::linear(10, 0.01, 0.02).unwrap();
        assert!(s.composed_variance(0).is_err());
        assert!(s.composed_variance(11).is_err());
    }

    #[test]
    fn zero_noise_forward_sample_scales_by_sqrt_alpha_bar() {
        let s = VarianceSchedule::linear(10, 0.1, 0.1).unwrap();
        let x0 = DenseTensor::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        let zero = DenseTensor::zeros(1, 3);
        let x3 = forward_sample_with_noise(&x0, 3, &s, &zero).unwrap();
        let scale = (0.729f64).sqrt();
        for (got, want) in x3.data().iter().zip(x0.data()) {
            assert!((got - want * scale).abs() < 1e-12);
        }
    }

    #[test]
    fn deep_forward_sample_is_nearly_pure_noise() {
        let s = VarianceSchedule::linear(1000, 1e-4, 0.02).unwrap();
        let x0 = DenseTensor::zeros(10_000, 1).map(|_| 0.7);
        let mut rng = Rng::seed_from_u64(5);
        let x_t = forward_sample(&x0, 1000, &s, &mut rng).unwrap();
        let mean = x_t.data().iter().sum::<f64>() / x_t.data().len() as f64;
        let var = x_t.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / x_t.data().len() as f64;
        // alpha_bar(1000) ~ 0, so mean ~ 0 and variance ~ 1
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn forward_sample_of_zero_data_has_composed_variance() {
        let s = VarianceSchedule::linear(100, 1e-3, 0.02).unwrap();
        let t = 40;
        let sigma2 = s.composed_variance(t).unwrap();
        let x0 = DenseTensor::zeros(10_000, 1);
        let mut rng = Rng::seed_from_u64(6);
        let x_t = forward_sample(&x0, t, &s, &mut rng).unwrap();
        let mean = x_t.data().iter().sum::<f64>() / x_t.data().len() as f64;
        let var = x_t.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / x_t.data().len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - sigma2).abs() / sigma2 < 0.05, "var {var} vs {sigma2}");
    }

    #[test]
    fn chain_with_t_zero_returns_input() {
        let s = VarianceSchedule::linear(10, 0.05, 0.05).unwrap();
        let x0 = DenseTensor::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut rng = Rng::seed_from_u64(1);
        let out = forward_chain(&x0, 0, &s, &mut rng).unwrap();
        assert_eq!(out, x0);
    }

    // Monte-Carlo oracle: the iterated chain and the closed-form marginal
    // must agree in mean and variance within 3 standard errors.
    #[test]
    fn chain_matches_closed_form_marginal() {
        let s = VarianceSchedule::linear(50, 0.05, 0.05).unwrap();
        let t = 10;
        let n = 10_000;
        let x0 = DenseTensor::zeros(n, 1).map(|_| 0.8);
        let mut rng = Rng::seed_from_u64(7);

        let chain = forward_chain(&x0, t, &s, &mut rng).unwrap();
        let single = forward_sample(&x0, t, &s, &mut rng).unwrap();

        let stats = |x: &DenseTensor| {
            let m = x.data().iter().sum::<f64>() / n as f64;
            let v = x.data().iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n as f64;
            (m, v)
        };
        let (m_chain, v_chain) = stats(&chain);
        let (m_single, v_single) = stats(&single);

        let sigma2 = s.composed_variance(t).unwrap();
        let se_mean = (sigma2 / n as f64).sqrt();
        let se_var = sigma2 * (2.0 / n as f64).sqrt();
        assert!((m_chain - m_single).abs() < 3.0 * se_mean * 1.5, "{m_chain} vs {m_single}");
        assert!((v_chain - v_single).abs() < 3.0 * se_var * 1.5, "{v_chain} vs {v_single}");
        // and both match the analytic marginal
        let expect_mean = 0.8 * s.alpha_bar(t).unwrap().sqrt();
        assert!((m_chain - expect_mean).abs() < 3.0 * se_mean);
        assert!((v_chain - sigma2).abs() < 3.0 * se_var);
    }

    #[test]
    fn reverse_step_is_deterministic_at_t1_and_recovers_x0() {
        // with a perfect oracle eps_hat = injected eps and t = 1 the
        // reverse step inverts the forward step exactly
        let s = VarianceSchedule::linear(10, 0.02, 0.04).unwrap();
        let x0 = DenseTensor::from_vec(1, 4, vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let mut rng = Rng::seed_from_u64(9);
        let eps = rng.normal_tensor(1, 4);
        let x1 = forward_sample_with_noise(&x0, 1, &s, &eps).unwrap();
        let back = reverse_step_mean(&s, &x1, 1, &eps, None, ReverseVariance::Posterior).unwrap();
        for (a, b) in back.data().iter().zip(x0.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    // Algebraic identity: with eps_hat equal to the true noise and zero
    // posterior noise, the reverse mean is
    // sqrt(alpha_bar_{t-1}) x0 + sqrt(alpha_t) (1-alpha_bar_{t-1})/sqrt(1-alpha_bar_t) eps.
    #[test]
    fn reverse_step_with_oracle_eps_matches_identity() {
        let s = VarianceSchedule::linear(20, 0.01, 0.08).unwrap();
        let t = 7;
        let x0 = DenseTensor::from_vec(1, 3, vec![0.3, 0.9, 0.1]).unwrap();
        let mut rng = Rng::seed_from_u64(13);
        let eps = rng.normal_tensor(1, 3);
        let x_t = forward_sample_with_noise(&x0, t, &s, &eps).unwrap();
        let back = reverse_step_mean(&s, &x_t, t, &eps, None, ReverseVariance::Posterior).unwrap();

        let ab_prev = s.alpha_bar(t - 1).unwrap();
        let ab = s.alpha_bar(t).unwrap();
        let alpha = s.alpha(t).unwrap();
        let c0 = ab_prev.sqrt();
        let ce = alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab).sqrt();
        for i in 0..3 {
            let expect = c0 * x0.get(0, i) + ce * eps.get(0, i);
            assert!((back.get(0, i) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn reverse_step_preserves_shape_and_validates_t() {
        let s = VarianceSchedule::linear(5, 0.1, 0.1).unwrap();
        let x = DenseTensor::zeros(3, 2);
        let eps = DenseTensor::zeros(3, 2);
        let out = reverse_step_mean(&s, &x, 3, &eps, None, ReverseVariance::Beta).unwrap();
        assert_eq!(out.shape(), (3, 2));
        assert!(reverse_step_mean(&s, &x, 0, &eps, None, ReverseVariance::Beta).is_err());
        assert!(reverse_step_mean(&s, &x, 6, &eps, None, ReverseVariance::Beta).is_err());
    }

    fn tiny_trained_model(data: &Dataset, epochs: usize) -> DiffusionModel {
        let schedule = VarianceSchedule::linear(20, 0.01, 0.05).unwrap();
        let config = DiffusionTrainConfig {
            hidden: vec![32, 32],
            embed_dim: 8,
            epochs,
            learning_rate: 1e-3,
            batch_size: Some(64),
            weight_decay: 0.0,
            seed: 3,
            log_interval: 50,
            reverse_variance: ReverseVariance::Posterior,
        };
        train_diffusion(data, schedule, &config).unwrap().0
    }

    #[test]
    fn purify_at_t_zero_is_identity() {
        let data = blob_dataset(64, 21);
        let model = tiny_trained_model(&data, 1);
        let mut rng = Rng::seed_from_u64(2);
        let out = model.purify(&data.features, 0, &mut rng).unwrap();
        assert_eq!(out, data.features);
    }

    #[test]
    fn purify_preserves_shape_stays_in_domain_and_is_seeded() {
        let data = blob_dataset(64, 22);
        let model = tiny_trained_model(&data, 30);
        let out1 = model.purify(&data.features, 5, &mut Rng::seed_from_u64(11)).unwrap();
        let out2 = model.purify(&data.features, 5, &mut Rng::seed_from_u64(11)).unwrap();
        assert_eq!(out1.shape(), data.features.shape());
        assert!(out1.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(out1, out2);
        assert!(model.purify(&data.features, 21, &mut Rng::seed_from_u64(1)).is_err());
    }

    // The analytic expectation: an untrained near-zero network predicting
    // unit Gaussian noise has MSE ~ E[eps^2] = 1.
    #[test]
    fn initial_training_loss_is_near_one() {
        let data = blob_dataset(256, 23);
        let schedule = VarianceSchedule::linear(50, 1e-3, 0.02).unwrap();
        let config = DiffusionTrainConfig {
            hidden: vec![16, 16],
            embed_dim: 8,
            epochs: 1,
            learning_rate: 1e-9,
            batch_size: None,
            weight_decay: 0.0,
            seed: 1,
            log_interval: 1,
            reverse_variance: ReverseVariance::Posterior,
        };
        let (_, log) = train_diffusion(&data, schedule, &config).unwrap();
        let first = log.first().unwrap().1;
        assert!((first - 1.0).abs() < 0.2, "initial loss {first}");
        assert!(log.iter().all(|(_, l)| *l > 0.0));
    }

    #[test]
    fn short_training_reduces_loss() {
        let data = blob_dataset(256, 24);
        let schedule = VarianceSchedule::linear(20, 0.01, 0.05).unwrap();
        let config = DiffusionTrainConfig {
            hidden: vec![32, 32],
            embed_dim: 8,
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: Some(128),
            weight_decay: 0.0,
            seed: 5,
            log_interval: 10,
            reverse_variance: ReverseVariance::Posterior,
        };
        let (_, log) = train_diffusion(&data, schedule, &config).unwrap();
        let first = log.first().unwrap().1;
        let last = log.last().unwrap().1;
        assert!(last < first * 0.8, "loss did not drop: {first} -> {last}");
        assert!(last < 0.5, "final loss {last}");
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let data = blob_dataset(64, 25);
        let a = tiny_trained_model(&data, 20);
        let b = tiny_trained_model(&data, 20);
        assert_eq!(a.noise_net(), b.noise_net());
    }
}
