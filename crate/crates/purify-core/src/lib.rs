//! Diffusion-based adversarial purification for tabular classifiers.
//!
//! The crate is organised around a small dense-network engine ([`nn`]) that
//! powers both an intrusion-detection classifier ([`classifier`]) and a
//! denoising diffusion model ([`diffusion`]). Adversarial examples against the
//! classifier are produced by [`attacks`], and [`harness`] sweeps purification
//! strength over diffusion steps to locate the optimum.
//!
//! Everything here is pure computation over in-memory data; file formats and
//! the command-line pipeline live in the companion `purifynet` crate. The
//! crate is `no_std`-compatible (with `alloc`): disable the `std` feature and
//! enable `libm` to build for targets without a standard library.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("purify-core requires either the `std` or the `libm` feature");

pub mod attacks;
pub mod classifier;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod harness;
pub(crate) mod math;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::DenseTensor;
