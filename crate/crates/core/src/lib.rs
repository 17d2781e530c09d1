// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Coverless multi-image steganography over diffusion latents.
//!
//! Secret images are encoded to latents, partially inverted, scrambled with
//! per-user seeded orthonormal keys, tiled into one latent, blended with a
//! public reference latent and denoised into a single stego image. A user
//! holding one private key recovers their own secret; the other segments
//! come out as noise-like garbage.
//!
//! Everything runs against the closed-form [`diffusion::ToyDenoiser`] and
//! [`codec::ToyCodec`] out of the box; [`backend::RemoteBackend`] talks to
//! an external model server.

pub mod backend;
pub mod channel;
pub mod codec;
pub mod diffusion;
pub mod error;
pub mod keymech;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
