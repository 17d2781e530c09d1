// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Seeded invertible latent encryption.
//!
//! An [`OrthoKey`] is the implied `d×d` orthonormal matrix
//!
//! ```text
//! Q[positions[i], positions[j]] = block[i][j]     (i, j < ⌊γd⌋)
//! Q[p, p]                       = 1               (p ∉ positions)
//! ```
//!
//! stored factored: the seeded coordinate selection plus the dense mixing
//! block obtained from the QR factorization of a seeded Gaussian matrix.
//! Coordinates outside `positions` pass through untouched.
//!
//! Random stream layout for seed `s` (ChaCha20, see [`crate::rng`]):
//! 1. `positions` = `rand::seq::index::sample(rng, d, k)` in returned order;
//! 2. `k·k` standard normals filling the Gaussian matrix row by row.
//!
//! The QR sign convention makes the diagonal of `R` nonnegative (column `j`
//! of `Q` is negated whenever `R[j][j] < 0`), so `Q` is unique for a given
//! Gaussian matrix.
//!
//! A [`FlipKey`] is the Noise Flip baseline `diag(e)`, `e ∈ {−1, +1}^d`.

use std::io::{Read, Write};

use faer::Mat;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{fill_standard_normal, seeded};

pub const KEY_MAGIC: &[u8; 4] = b"MKEY";
pub const KEY_VERSION: u16 = 1;

/// Number of transformed coordinates for a `d`-dimensional key of strength `gamma`.
pub fn mixed_count(d: usize, gamma: f64) -> usize {
    ((gamma * d as f64).floor() as usize).min(d)
}

/// Seeded Random Basis transform.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoKey {
    dim: usize,
    strength: f64,
    seed: u64,
    positions: Vec<usize>,
    /// Row-major `k×k`.
    block: Vec<f64>,
}

impl OrthoKey {
    /// Builds the transform for `(d, gamma, seed)`. `gamma = 0` is the identity.
    pub fn build(d: usize, gamma: f64, seed: u64) -> Result<OrthoKey> {
        if d == 0 {
            return Err(Error::invalid("key dimension must be at least 1"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(format!("key strength {gamma} outside [0, 1]")));
        }
        let k = mixed_count(d, gamma);
        if k == 0 {
            return Ok(OrthoKey {
                dim: d,
                strength: gamma,
                seed,
                positions: Vec::new(),
                block: Vec::new(),
            });
        }

        let mut rng = seeded(seed);
        let positions = rand::seq::index::sample(&mut rng, d, k).into_vec();
        let mut gauss = vec![0.0; k * k];
        fill_standard_normal(&mut rng, &mut gauss);

        let g = Mat::<f64>::from_fn(k, k, |i, j| gauss[i * k + j]);
        drop(gauss);
        let qr = g.qr();
        let q = qr.compute_Q();
        let r = qr.R();
        let mut block = vec![0.0; k * k];
        for j in 0..k {
            let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..k {
                block[i * k + j] = sign * q[(i, j)];
            }
        }
        Ok(OrthoKey {
            dim: d,
            strength: gamma,
            seed,
            positions,
            block,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Number of mixed coordinates, `⌊γd⌋`.
    pub fn mixed(&self) -> usize {
        self.positions.len()
    }

    /// Row-major mixing block.
    pub fn block(&self) -> &[f64] {
        &self.block
    }

    pub fn is_identity(&self) -> bool {
        self.positions.is_empty()
    }

    /// `‖QQᵀ − I‖∞` (largest absolute row sum). Only the mixed block can
    /// contribute.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.mixed();
        if k == 0 {
            return 0.0;
        }
        let b = Mat::<f64>::from_fn(k, k, |i, j| self.block[i * k + j]);
        let gram = b.as_ref() * b.transpose();
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| (gram[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::dims(self.dim, len));
        }
        Ok(())
    }

    fn gather(&self, z: &[f64]) -> Vec<f64> {
        self.positions.iter().map(|&p| z[p]).collect()
    }

    /// `Q·z`.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z.len())?;
        let mut out = z.to_vec();
        if self.is_identity() {
            return Ok(out);
        }
        let k = self.mixed();
        let sub = self.gather(z);
        for (row, &p) in self.block.chunks_exact(k).zip(&self.positions) {
            out[p] = dot(row, &sub);
        }
        Ok(out)
    }

    /// `Qᵀ·z`, the exact adjoint of [`OrthoKey::apply`].
    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z.len())?;
        let mut out = z.to_vec();
        if self.is_identity() {
            return Ok(out);
        }
        let k = self.mixed();
        let mut acc = vec![0.0; k];
        for (row, &p) in self.block.chunks_exact(k).zip(&self.positions) {
            axpy(z[p], row, &mut acc);
        }
        for (&p, v) in self.positions.iter().zip(acc) {
            out[p] = v;
        }
        Ok(out)
    }

    /// Serializes the seed triple; the block and positions are rebuilt on load.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let d = u32::try_from(self.dim).map_err(|_| Error::invalid("key dimension exceeds u32"))?;
        w.write_all(KEY_MAGIC)?;
        w.write_all(&KEY_VERSION.to_le_bytes())?;
        w.write_all(&d.to_le_bytes())?;
        w.write_all(&self.strength.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<OrthoKey> {
        let mut buf = [0u8; 26];
        r.read_exact(&mut buf)?;
        if &buf[..4] != KEY_MAGIC {
            return Err(Error::Format("bad key magic".into()));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != KEY_VERSION {
            return Err(Error::Format(format!("unsupported key version {version}")));
        }
        let d = u32::from_le_bytes(buf[6..10].try_into().unwrap()) as usize;
        let gamma = f64::from_le_bytes(buf[10..18].try_into().unwrap());
        let seed = u64::from_le_bytes(buf[18..26].try_into().unwrap());
        OrthoKey::build(d, gamma, seed)
    }
}

/// Noise Flip key: seeded signs, one fair coin per coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipKey {
    seed: u64,
    signs: Vec<i8>,
}

impl FlipKey {
    pub fn build(d: usize, seed: u64) -> Result<FlipKey> {
        if d == 0 {
            return Err(Error::invalid("key dimension must be at least 1"));
        }
        let mut rng = seeded(seed);
        let signs = (0..d)
            .map(|_| if rng.random::<bool>() { -1 } else { 1 })
            .collect();
        Ok(FlipKey { seed, signs })
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `diag(e)·z`; its own inverse.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.signs.len() {
            return Err(Error::dims(self.signs.len(), z.len()));
        }
        Ok(z.iter()
            .zip(&self.signs)
            .map(|(v, &s)| if s < 0 { -v } else { *v })
            .collect())
    }
}

/// Which orthonormal family encrypts latents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeyMechanism {
    #[default]
    RandomBasis,
    NoiseFlip,
}

impl std::str::FromStr for KeyMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_basis" | "random-basis" => Ok(KeyMechanism::RandomBasis),
            "noise_flip" | "noise-flip" => Ok(KeyMechanism::NoiseFlip),
            other => Err(Error::invalid(format!("unknown key mechanism {other:?}"))),
        }
    }
}

/// A built key of either mechanism.
#[derive(Debug, Clone)]
pub enum Cipher {
    Ortho(OrthoKey),
    Flip(FlipKey),
}

impl Cipher {
    /// Noise Flip ignores `gamma`.
    pub fn build(mechanism: KeyMechanism, d: usize, gamma: f64, seed: u64) -> Result<Cipher> {
        Ok(match mechanism {
            KeyMechanism::RandomBasis => Cipher::Ortho(OrthoKey::build(d, gamma, seed)?),
            KeyMechanism::NoiseFlip => Cipher::Flip(FlipKey::build(d, seed)?),
        })
    }

    pub fn encrypt(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            Cipher::Ortho(k) => k.apply(z),
            Cipher::Flip(k) => k.apply(z),
        }
    }

    pub fn decrypt(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            Cipher::Ortho(k) => k.inverse(z),
            Cipher::Flip(k) => k.apply(z),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4 * 4;
    for (ca, cb) in a[..chunks].chunks_exact(4).zip(b[..chunks].chunks_exact(4)) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    for (x, y) in a[chunks..].iter().zip(&b[chunks..]) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
