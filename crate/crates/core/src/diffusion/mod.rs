// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic samplers over a pluggable noise predictor.

mod ddim;
mod edict;
mod schedule;
mod toy;

pub use ddim::{ddim_denoise, ddim_invert, ddim_invert_step, ddim_step};
pub use edict::{edict_denoise, edict_invert, Coupled};
pub use schedule::{Schedule, TRAIN_STEPS};
pub use toy::{ToyDenoiser, TOY_SIGMA0};

use crate::error::Result;
use crate::tensor::Latent;

/// What the denoiser is conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    /// Empty string is the null-text (unconditional) prompt.
    pub prompt: String,
    pub ref_latent: Option<Latent>,
    /// Zero whenever `ref_latent` is absent.
    pub ref_weight: f64,
    /// Passed through to remote backends untouched.
    pub guidance: f64,
}

impl Condition {
    pub fn null() -> Self {
        Condition::prompt("")
    }

    pub fn prompt(prompt: impl Into<String>) -> Self {
        Condition {
            prompt: prompt.into(),
            ref_latent: None,
            ref_weight: 0.0,
            guidance: 1.0,
        }
    }

    pub fn with_reference(mut self, latent: Latent, weight: f64) -> Self {
        self.ref_latent = Some(latent);
        self.ref_weight = weight.clamp(0.0, 1.0);
        self
    }

    pub fn is_null(&self) -> bool {
        self.prompt.is_empty()
    }
}

/// The schedule position a prediction is requested for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Index into the sampling schedule, `0..=T`.
    pub index: usize,
    /// Matching timestep of the 1000-step training schedule.
    pub timestep: usize,
    pub alpha_bar: f64,
}

/// ε-prediction backend (the U-Net in a real latent diffusion model).
///
/// Implementations must return a tensor of the input's shape and be
/// deterministic for identical inputs.
pub trait NoisePredictor: Send + Sync {
    fn predict(&self, latent: &Latent, step: StepInfo, cond: &Condition) -> Result<Latent>;

    /// Whether independent sampler runs may call `predict` concurrently.
    fn concurrency_safe(&self) -> bool {
        false
    }
}

impl<P: NoisePredictor + ?Sized> NoisePredictor for &P {
    fn predict(&self, latent: &Latent, step: StepInfo, cond: &Condition) -> Result<Latent> {
        (**self).predict(latent, step, cond)
    }

    fn concurrency_safe(&self) -> bool {
        (**self).concurrency_safe()
    }
}

impl<P: NoisePredictor + ?Sized> NoisePredictor for std::sync::Arc<P> {
    fn predict(&self, latent: &Latent, step: StepInfo, cond: &Condition) -> Result<Latent> {
        (**self).predict(latent, step, cond)
    }

    fn concurrency_safe(&self) -> bool {
        (**self).concurrency_safe()
    }
}
