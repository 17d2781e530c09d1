// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Image and latent similarity metrics.
//!
//! SSIM follows the common 8×8 uniform-window variant: windows step by 4
//! pixels over the luma plane (0.299R + 0.587G + 0.114B), constants
//! `C1 = (0.01·255)²`, `C2 = (0.03·255)²`, population statistics. Images
//! smaller than 8×8 use a single window covering the whole image.

use std::io::Write;

use serde::Serialize;

use crate::codec::{ImageBuffer, LUMA};
use crate::error::{Error, Result};
use crate::tensor::Latent;

/// PSNR reported for identical inputs.
pub const PSNR_CAP: f64 = 99.0;
const WINDOW: usize = 8;
const STRIDE: usize = 4;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.same_dims(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len().max(1) as f64)
}

pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (255.0 * 255.0 / m).log10()).min(PSNR_CAP))
}

fn luma_plane(img: &ImageBuffer) -> Vec<f64> {
    img.data()
        .chunks_exact(3)
        .map(|p| LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64)
        .collect()
}

struct WindowStats {
    mean_x: f64,
    mean_y: f64,
    var_x: f64,
    var_y: f64,
    cov: f64,
}

fn window_stats(a: &ImageBuffer, b: &ImageBuffer) -> Result<Vec<WindowStats>> {
    a.same_dims(b)?;
    let (w, h) = (a.width(), a.height());
    if w == 0 || h == 0 {
        return Err(Error::invalid("empty image"));
    }
    let (x, y) = (luma_plane(a), luma_plane(b));
    let (ww, wh) = if w < WINDOW || h < WINDOW { (w, h) } else { (WINDOW, WINDOW) };
    let starts = |len: usize, win: usize| (0..=len - win).step_by(STRIDE.max(1)).collect::<Vec<_>>();
    let mut out = Vec::new();
    for &r in &starts(h, wh) {
        for &c in &starts(w, ww) {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..wh {
                let row = (r + dy) * w + c;
                for i in row..row + ww {
                    let (p, q) = (x[i], y[i]);
                    sx += p;
                    sy += q;
                    sxx += p * p;
                    syy += q * q;
                    sxy += p * q;
                }
            }
            let n = (ww * wh) as f64;
            let (mx, my) = (sx / n, sy / n);
            out.push(WindowStats {
                mean_x: mx,
                mean_y: my,
                var_x: sxx / n - mx * mx,
                var_y: syy / n - my * my,
                cov: sxy / n - mx * my,
            });
        }
    }
    Ok(out)
}

pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let stats = window_stats(a, b)?;
    let total: f64 = stats
        .iter()
        .map(|s| {
            ((2.0 * s.mean_x * s.mean_y + C1) * (2.0 * s.cov + C2))
                / ((s.mean_x * s.mean_x + s.mean_y * s.mean_y + C1) * (s.var_x + s.var_y + C2))
        })
        .sum();
    Ok(total / stats.len() as f64)
}

/// Windowed mean of the SSIM structure term `(2σxy + C)/(σx² + σy² + C)`, `C = C2/2`.
pub fn s_component(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let c = C2 / 2.0;
    let stats = window_stats(a, b)?;
    let total: f64 = stats
        .iter()
        .map(|s| (2.0 * s.cov + c) / (s.var_x + s.var_y + c))
        .sum();
    Ok(total / stats.len() as f64)
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

pub fn latent_corr(a: &Latent, b: &Latent) -> Result<f64> {
    b.ensure_shape(a.shape())?;
    Ok(pearson(a.data(), b.data()))
}

/// Pixel-level Pearson correlation.
pub fn image_corr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.same_dims(b)?;
    let fa: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let fb: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    Ok(pearson(&fa, &fb))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
    #[serde(rename = "s")]
    pub s_component: f64,
    pub corr: f64,
}

impl MetricReport {
    pub fn compare(name: impl Into<String>, reference: &ImageBuffer, candidate: &ImageBuffer) -> Result<Self> {
        Ok(MetricReport {
            name: name.into(),
            psnr: psnr(reference, candidate)?,
            ssim: ssim(reference, candidate)?,
            s_component: s_component(reference, candidate)?,
            corr: image_corr(reference, candidate)?,
        })
    }
}

/// Writes `name,psnr,ssim,s,corr` rows.
pub fn write_csv<'a>(w: impl Write, rows: impl IntoIterator<Item = &'a MetricReport>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut any = false;
    for row in rows {
        out.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
        any = true;
    }
    if !any {
        out.write_record(["name", "psnr", "ssim", "s", "corr"])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal_vec;

    fn textured(seed: u64) -> ImageBuffer {
        let noise = standard_normal_vec(seed, 32 * 32 * 3);
        let mut i = 0;
        ImageBuffer::from_fn(32, 32, |x, y| {
            let base = (x * 5 + y * 3) as f64;
            let mut px = [0u8; 3];
            for p in &mut px {
                *p = crate::codec::to_u8(base + 20.0 * noise[i]);
                i += 1;
            }
            px
        })
    }

    #[test]
    fn psnr_cap_and_floor() {
        let a = textured(1);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        let black = ImageBuffer::filled(4, 4, [0, 0, 0]);
        let white = ImageBuffer::filled(4, 4, [255, 255, 255]);
        assert_eq!(psnr(&black, &white).unwrap(), 0.0);
    }

    #[test]
    fn psnr_of_mse_25() {
        let a = ImageBuffer::filled(4, 4, [100, 100, 100]);
        let b = ImageBuffer::filled(4, 4, [105, 95, 105]);
        assert!((psnr(&a, &b).unwrap() - 34.15140352195873).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let a = ImageBuffer::filled(4, 4, [0, 0, 0]);
        let b = ImageBuffer::filled(4, 5, [0, 0, 0]);
        assert!(psnr(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
        assert!(s_component(&a, &b).is_err());
    }

    #[test]
    fn self_similarity_is_one() {
        let a = textured(2);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((s_component(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric() {
        let (a, b) = (textured(3), textured(4));
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        assert!((s_component(&a, &b).unwrap() - s_component(&b, &a).unwrap()).abs() < 1e-12);
        let (x, y) = (standard_normal_vec(1, 100), standard_normal_vec(2, 100));
        assert!((pearson(&x, &y) - pearson(&y, &x)).abs() < 1e-15);
    }

    #[test]
    fn inverted_image_has_non_positive_structure() {
        let a = textured(5);
        let inv = ImageBuffer::new(a.width(), a.height(), a.data().iter().map(|v| 255 - v).collect()).unwrap();
        assert!(s_component(&a, &inv).unwrap() <= 0.0);
    }

    #[test]
    fn latent_correlation_extremes() {
        let z = Latent::gaussian(crate::tensor::Shape::new(4, 8, 8), 3);
        assert!((latent_corr(&z, &z).unwrap() - 1.0).abs() < 1e-12);
        assert!((latent_corr(&z, &z.scaled(-1.0)).unwrap() + 1.0).abs() < 1e-12);
        let mut worst: f64 = 0.0;
        for s in 0..20 {
            let a = standard_normal_vec(100 + s, 4096);
            let b = standard_normal_vec(200 + s, 4096);
            worst = worst.max(pearson(&a, &b).abs());
        }
        assert!(worst < 0.05, "{worst}");
    }

    #[test]
    fn psnr_falls_as_noise_grows() {
        let base = ImageBuffer::filled(32, 32, [128, 128, 128]);
        let mut last = f64::INFINITY;
        for sigma in [1.0, 2.0, 5.0, 10.0] {
            let noisy = crate::channel::apply_gaussian(&base, sigma, 9);
            let p = psnr(&base, &noisy).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn csv_header_is_fixed() {
        let mut buf = Vec::new();
        let row = MetricReport {
            name: "a".into(),
            psnr: 30.0,
            ssim: 0.5,
            s_component: 0.25,
            corr: 0.75,
        };
        write_csv(&mut buf, [&row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("name,psnr,ssim,s,corr\n"));
        assert!(text.contains("a,30.0,0.5,0.25,0.75"));
        let mut empty = Vec::new();
        write_csv(&mut empty, []).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "name,psnr,ssim,s,corr\n");
    }
}
