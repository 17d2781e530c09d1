// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};
use crate::keymech::OrthoKey;
use crate::tensor::{Latent, Shape};

/// Grid cell `(row, col)` of 1-based segment `j`.
pub fn cell(j: usize, n2: usize) -> (usize, usize) {
    ((j - 1) / n2, (j - 1) % n2)
}

/// Places segments row-major on an `n1 × n2` grid.
pub fn tile(segments: &[Latent], n1: usize, n2: usize) -> Result<Latent> {
    if segments.len() != n1 * n2 || segments.is_empty() {
        return Err(Error::invalid(format!(
            "{} segments for a {n1}x{n2} grid",
            segments.len()
        )));
    }
    let s = segments[0].shape();
    let mut out = Latent::zeros(Shape::new(s.channels, s.height * n1, s.width * n2));
    for (k, seg) in segments.iter().enumerate() {
        seg.ensure_shape(s)?;
        let (r, c) = cell(k + 1, n2);
        out.paste(r * s.height, c * s.width, seg)?;
    }
    Ok(out)
}

/// Inverse of [`tile`].
pub fn untile(z: &Latent, n1: usize, n2: usize) -> Result<Vec<Latent>> {
    let s = z.shape();
    if n1 == 0 || n2 == 0 || !s.height.is_multiple_of(n1) || !s.width.is_multiple_of(n2) {
        return Err(Error::dims(format!("height/{n1}, width/{n2} whole"), s));
    }
    let (h, w) = (s.height / n1, s.width / n2);
    (1..=n1 * n2)
        .map(|j| {
            let (r, c) = cell(j, n2);
            z.crop(r * h, c * w, h, w)
        })
        .collect()
}

/// `√α·Q(z_prot) + √(1−α)·z_ref`.
pub fn fuse(z_prot: &Latent, z_ref: &Latent, alpha: f64, key: &OrthoKey) -> Result<Latent> {
    check_alpha(alpha)?;
    z_ref.ensure_shape(z_prot.shape())?;
    let mixed = Latent::from_vec(z_prot.shape(), key.apply(z_prot.data())?)?;
    mixed.lin_comb(alpha.sqrt(), z_ref, (1.0 - alpha).sqrt())
}

/// `Qᵀ((z_pub − √(1−α)·z_ref)/√α)`, the exact inverse of [`fuse`].
pub fn decompose(z_pub: &Latent, z_ref: &Latent, alpha: f64, key: &OrthoKey) -> Result<Latent> {
    check_alpha(alpha)?;
    z_ref.ensure_shape(z_pub.shape())?;
    let a = alpha.sqrt();
    let unblended = z_pub.lin_comb(1.0 / a, z_ref, -(1.0 - alpha).sqrt() / a)?;
    Latent::from_vec(z_pub.shape(), key.inverse(unblended.data())?)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha = {alpha} outside (0, 1]")))
    }
}
