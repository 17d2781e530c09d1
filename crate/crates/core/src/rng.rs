// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Seeded random streams.
//!
//! Every random quantity in the toolkit (keys, initial noise, channel noise,
//! toy prior patterns) is drawn from ChaCha20 seeded through
//! [`SeedableRng::seed_from_u64`]. ChaCha20 has published test vectors
//! (RFC 8439), so a port only has to reproduce the stream and the
//! `seed_from_u64` expansion to regenerate identical keys.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SeededRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Fills `out` with i.i.d. standard normals in order.
pub fn fill_standard_normal(rng: &mut SeededRng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

pub fn standard_normal_vec(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = seeded(seed);
    let mut v = vec![0.0; len];
    fill_standard_normal(&mut rng, &mut v);
    v
}

/// Derives an independent stream seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}
