// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Closed-form ε-predictor for a Gaussian data prior.
//!
//! With clean latents distributed as `N(μ, σ₀²I)` the optimal predictor is
//!
//! ```text
//! E[x₀ | z_t] = μ + σ₀²√ᾱ / (ᾱσ₀² + 1 − ᾱ) · (z_t − √ᾱ·μ)
//! ε̂           = (z_t − √ᾱ·E[x₀ | z_t]) / √(1 − ᾱ)
//! ```
//!
//! `μ` depends on the condition: zero for the null prompt, otherwise a smooth
//! cosine pattern seeded by the SHA-256 of the prompt, blended toward the
//! reference latent by `ref_weight`.

use std::f64::consts::TAU;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::tensor::{Latent, Shape};

use super::{Condition, NoisePredictor, StepInfo};

pub const TOY_SIGMA0: f64 = 0.5;
const PATTERN_TERMS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyDenoiser {
    sigma0: f64,
}

impl Default for ToyDenoiser {
    fn default() -> Self {
        ToyDenoiser { sigma0: TOY_SIGMA0 }
    }
}

impl ToyDenoiser {
    pub fn new(sigma0: f64) -> Result<Self> {
        if !(sigma0 >= 0.0 && sigma0.is_finite()) {
            return Err(Error::invalid(format!("prior scale {sigma0} must be finite and >= 0")));
        }
        Ok(ToyDenoiser { sigma0 })
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Prior mean `μ_c` for `cond` at `shape`.
    pub fn prior_mean(&self, shape: Shape, cond: &Condition) -> Result<Latent> {
        let mut mu = prompt_pattern(shape, &cond.prompt);
        if let Some(reference) = &cond.ref_latent {
            reference.ensure_shape(shape)?;
            let w = cond.ref_weight;
            mu = mu.lin_comb(1.0 - w, reference, w)?;
        }
        Ok(mu)
    }
}

fn prompt_pattern(shape: Shape, prompt: &str) -> Latent {
    if prompt.is_empty() {
        return Latent::zeros(shape);
    }
    let digest = Sha256::digest(prompt.as_bytes());
    let seed = u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
    let mut rng = seeded(seed);
    let terms: Vec<Vec<(f64, f64, f64, f64)>> = (0..shape.channels)
        .map(|_| {
            (0..PATTERN_TERMS)
                .map(|_| {
                    let fy = rng.random_range(0..3) as f64;
                    let fx = rng.random_range(0..3) as f64;
                    let phase = rng.random::<f64>() * TAU;
                    let amp = 0.1 + 0.2 * rng.random::<f64>();
                    (fy, fx, phase, amp)
                })
                .collect()
        })
        .collect();
    let (h, w) = (shape.height as f64, shape.width as f64);
    Latent::from_fn(shape, |c, y, x| {
        terms[c]
            .iter()
            .map(|&(fy, fx, phase, amp)| amp * (TAU * (fy * y as f64 / h + fx * x as f64 / w) + phase).cos())
            .sum()
    })
}

impl NoisePredictor for ToyDenoiser {
    fn predict(&self, latent: &Latent, step: StepInfo, cond: &Condition) -> Result<Latent> {
        let ab = step.alpha_bar;
        if ab >= 1.0 {
            return Err(Error::invalid("noise prediction is undefined at step 0"));
        }
        let mu = self.prior_mean(latent.shape(), cond)?;
        let s2 = self.sigma0 * self.sigma0;
        let root = ab.sqrt();
        let gain = s2 * root / (ab * s2 + 1.0 - ab);
        let denom = (1.0 - ab).sqrt();
        let data = latent
            .data()
            .iter()
            .zip(mu.data())
            .map(|(&z, &m)| {
                let x0 = m + gain * (z - root * m);
                (z - root * x0) / denom
            })
            .collect();
        Latent::from_vec(latent.shape(), data)
    }

    fn concurrency_safe(&self) -> bool {
        true
    }
}
