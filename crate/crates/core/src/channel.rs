// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Transmission degradations: additive Gaussian noise and a blockwise
//! DCT-quantization ("JPEG-like") round trip.
//!
//! The JPEG-like path mirrors baseline JPEG without entropy coding or chroma
//! subsampling: JFIF full-range YCbCr, edge-replicated padding to 8×8
//! blocks, level shift, orthonormal 8×8 DCT-II, quantization with the
//! Annex K tables scaled by the IJG quality rule, dequantization, inverse
//! DCT, back to RGB with rounding and clamping.

use std::str::FromStr;
use std::sync::OnceLock;

use rand_distr::{Distribution, Normal};

use crate::codec::{to_u8, ImageBuffer};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[rustfmt::skip]
const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

#[rustfmt::skip]
const CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degradation {
    None,
    /// σ in 0–255 pixel units.
    Gaussian { sigma: f64 },
    Jpeg { quality: u8 },
}

impl Degradation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Degradation::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::invalid(format!("noise sigma {sigma} must be finite and >= 0")))
            }
            Degradation::Jpeg { quality } if !(1..=100).contains(&quality) => {
                Err(Error::invalid(format!("JPEG quality {quality} outside 1..=100")))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, img: &ImageBuffer, seed: u64) -> Result<ImageBuffer> {
        self.validate()?;
        match *self {
            Degradation::None => Ok(img.clone()),
            Degradation::Gaussian { sigma } => Ok(apply_gaussian(img, sigma, seed)),
            Degradation::Jpeg { quality } => apply_jpeg(img, quality),
        }
    }
}

impl FromStr for Degradation {
    type Err = Error;

    /// `none`, `gaussian:<sigma>` or `jpeg:<quality>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad degradation {s:?}; expected gaussian:<sigma> or jpeg:<quality>"));
        let d = match s.split_once(':') {
            None if s == "none" => Degradation::None,
            Some(("gaussian", v)) => Degradation::Gaussian {
                sigma: v.parse().map_err(|_| bad())?,
            },
            Some(("jpeg", v)) => Degradation::Jpeg {
                quality: v.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        d.validate()?;
        Ok(d)
    }
}

/// Adds seeded i.i.d. `N(0, σ²)` to every sample, then rounds and clamps.
pub fn apply_gaussian(img: &ImageBuffer, sigma: f64, seed: u64) -> ImageBuffer {
    if sigma <= 0.0 {
        return img.clone();
    }
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let data = img
        .data()
        .iter()
        .map(|&v| to_u8(v as f64 + normal.sample(&mut rng)))
        .collect();
    ImageBuffer::new(img.width(), img.height(), data).expect("same dimensions")
}

/// IJG quality scaling of a base table.
pub fn quant_table(base: &[u16; 64], quality: u8) -> [f64; 64] {
    let q = quality.clamp(1, 100) as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    base.map(|b| ((b as u32 * scale + 50) / 100).clamp(1, 255) as f64)
}

fn dct_basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let cu = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5 * cu * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        m
    })
}

/// `M·B·Mᵀ` (forward) or `Mᵀ·B·M` (inverse).
fn transform(block: &[f64; 64], inverse: bool) -> [f64; 64] {
    let m = dct_basis();
    let at = |r: usize, c: usize| if inverse { m[c][r] } else { m[r][c] };
    let mut tmp = [0.0; 64];
    for r in 0..8 {
        for c in 0..8 {
            tmp[r * 8 + c] = (0..8).map(|k| at(r, k) * block[k * 8 + c]).sum();
        }
    }
    let mut out = [0.0; 64];
    for r in 0..8 {
        for c in 0..8 {
            out[r * 8 + c] = (0..8).map(|k| tmp[r * 8 + k] * at(c, k)).sum();
        }
    }
    out
}

pub fn apply_jpeg(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    Degradation::Jpeg { quality }.validate()?;
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Ok(img.clone());
    }
    let (pw, ph) = (w.div_ceil(8) * 8, h.div_ceil(8) * 8);
    let mut planes = vec![vec![0.0; pw * ph]; 3];
    for y in 0..ph {
        for x in 0..pw {
            let [r, g, b] = img.pixel(x.min(w - 1), y.min(h - 1)).map(|v| v as f64);
            let i = y * pw + x;
            planes[0][i] = 0.299 * r + 0.587 * g + 0.114 * b;
            planes[1][i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
            planes[2][i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
        }
    }
    let tables = [
        quant_table(&LUMA_TABLE, quality),
        quant_table(&CHROMA_TABLE, quality),
        quant_table(&CHROMA_TABLE, quality),
    ];
    for (plane, table) in planes.iter_mut().zip(&tables) {
        for by in (0..ph).step_by(8) {
            for bx in (0..pw).step_by(8) {
                let mut block = [0.0; 64];
                for r in 0..8 {
                    for c in 0..8 {
                        block[r * 8 + c] = plane[(by + r) * pw + bx + c] - 128.0;
                    }
                }
                let mut coef = transform(&block, false);
                for (v, q) in coef.iter_mut().zip(table) {
                    *v = (*v / q).round() * q;
                }
                let back = transform(&coef, true);
                for r in 0..8 {
                    for c in 0..8 {
                        plane[(by + r) * pw + bx + c] = back[r * 8 + c] + 128.0;
                    }
                }
            }
        }
    }
    Ok(ImageBuffer::from_fn(w, h, |x, y| {
        let i = y * pw + x;
        let (yy, cb, cr) = (planes[0][i], planes[1][i] - 128.0, planes[2][i] - 128.0);
        [
            to_u8(yy + 1.402 * cr),
            to_u8(yy - 0.344136 * cb - 0.714136 * cr),
            to_u8(yy + 1.772 * cb),
        ]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;

    fn gradient() -> ImageBuffer {
        ImageBuffer::from_fn(20, 12, |x, y| [(x * 12) as u8, (y * 20) as u8, ((x + y) * 6) as u8])
    }

    #[test]
    fn zero_sigma_is_identity() {
        let img = gradient();
        assert_eq!(apply_gaussian(&img, 0.0, 1), img);
    }

    #[test]
    fn gaussian_is_seeded() {
        let img = gradient();
        assert_eq!(apply_gaussian(&img, 3.0, 5), apply_gaussian(&img, 3.0, 5));
        assert_ne!(apply_gaussian(&img, 3.0, 5), apply_gaussian(&img, 3.0, 6));
    }

    #[test]
    fn sigma_five_on_mid_gray_matches_analytic_psnr() {
        let gray = ImageBuffer::filled(128, 128, [128, 128, 128]);
        let p = psnr(&gray, &apply_gaussian(&gray, 5.0, 42)).unwrap();
        assert!((p - 20.0 * (255.0f64 / 5.0).log10()).abs() < 0.3, "{p}");
    }

    #[test]
    fn constant_image_survives_jpeg() {
        let img = ImageBuffer::filled(16, 16, [90, 140, 200]);
        let out = apply_jpeg(&img, 70).unwrap();
        let worst = img.data().iter().zip(out.data()).map(|(a, b)| (*a as i32 - *b as i32).abs()).max().unwrap();
        assert!(worst <= 2, "{worst}");
    }

    #[test]
    fn quality_bounds() {
        assert!(apply_jpeg(&gradient(), 0).is_err());
        assert!(apply_jpeg(&gradient(), 101).is_err());
        assert!("jpeg:0".parse::<Degradation>().is_err());
        assert!("gaussian:-1".parse::<Degradation>().is_err());
        assert_eq!("jpeg:70".parse::<Degradation>().unwrap(), Degradation::Jpeg { quality: 70 });
        assert_eq!("gaussian:5".parse::<Degradation>().unwrap(), Degradation::Gaussian { sigma: 5.0 });
        assert!("blur:3".parse::<Degradation>().is_err());
    }

    #[test]
    fn ijg_scaling() {
        assert_eq!(quant_table(&LUMA_TABLE, 50)[0], 16.0);
        assert_eq!(quant_table(&LUMA_TABLE, 100), [1.0; 64]);
        // q = 70 → scale 60: (16·60 + 50)/100 = 10.
        assert_eq!(quant_table(&LUMA_TABLE, 70)[0], 10.0);
    }

    #[test]
    fn dct_round_trip() {
        let mut block = [0.0; 64];
        for (i, v) in block.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin() * 100.0;
        }
        let back = transform(&transform(&block, false), true);
        for (a, b) in block.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
