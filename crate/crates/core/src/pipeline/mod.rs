// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Hiding, reconstruction and reference generation.
//!
//! Hiding: each secret is downsampled, encoded, inverted a short way into
//! the noise schedule, scrambled with its owner's key and nudged a few more
//! steps forward. The segments are tiled into one latent, mixed with the
//! public key, blended with the reference latent and denoised into the
//! stego image. Reconstruction walks the same path backwards; only the
//! segment whose key matches comes out clean.

mod config;
mod layout;
mod residue;
mod stages;

pub use config::{split_factors, BackendSpec, StegoConfig};
pub use layout::{cell, decompose, fuse, tile, untile};
pub use residue::{structural_residue, ResidueConfig};
pub use stages::{refgen, Engine, HideTrace, Reference, RevealReport, RevealedSegment, Stego};
