// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use crate::codec::ImageBuffer;
use crate::diffusion::{ddim_denoise, edict_invert, Condition, Coupled, Schedule};
use crate::error::{Error, Result};
use crate::keymech::{Cipher, KeyMechanism};
use crate::metrics::s_component;

use super::stages::Engine;

/// Settings for [`structural_residue`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueConfig {
    pub steps: usize,
    pub xi: f64,
    pub edict_p: f64,
    pub seed: u64,
}

impl Default for ResidueConfig {
    fn default() -> Self {
        ResidueConfig {
            steps: 50,
            xi: 0.4,
            edict_p: 0.93,
            seed: 1,
        }
    }
}

/// How much image structure survives encrypting `channels` latent channels.
///
/// The image is encoded and inverted into the private window; the last
/// `channels` channels (highest index first) are encrypted as one vector
/// with full-strength Random Basis or with Noise Flip; the latent is then
/// denoised and decoded without decryption. Returns the structure term `S`
/// between the original and the result.
pub fn structural_residue(
    engine: &Engine,
    img: &ImageBuffer,
    mechanism: KeyMechanism,
    channels: usize,
    cfg: &ResidueConfig,
) -> Result<f64> {
    let sched = Schedule::new(cfg.steps, cfg.xi)?;
    let w = sched.window();
    let null = Condition::null();
    let pred = engine.predictor();
    let z0 = engine.codec().encode(img)?;
    let shape = z0.shape();
    if channels > shape.channels {
        return Err(Error::invalid(format!(
            "{channels} channels requested, latent has {}",
            shape.channels
        )));
    }
    let mut z = edict_invert(Coupled::twin(z0), 0, w, pred, &null, &sched, cfg.edict_p)?.x;
    if channels > 0 {
        let first = shape.channels - channels;
        let range = first * shape.plane()..shape.len();
        let key = Cipher::build(mechanism, range.len(), 1.0, cfg.seed)?;
        let enc = key.encrypt(&z.data()[range.clone()])?;
        z.data_mut()[range].copy_from_slice(&enc);
    }
    let out = engine.codec().decode(&ddim_denoise(&z, w, 0, pred, &null, &sched)?)?;
    s_component(img, &out)
}
