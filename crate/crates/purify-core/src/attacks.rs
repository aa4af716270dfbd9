//! Adversarial example generation.
