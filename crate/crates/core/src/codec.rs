// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Image buffers, spatial resampling and image ↔ latent codecs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Latent, Shape};

/// 8-bit RGB, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::dims(width * height * 3, data.len()));
        }
        Ok(ImageBuffer {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        ImageBuffer {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        ImageBuffer {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn same_dims(&self, other: &ImageBuffer) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    /// Decodes any format the `image` crate reads, converted to RGB8.
    pub fn load(path: impl AsRef<Path>) -> Result<ImageBuffer> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        ImageBuffer::new(w as usize, h as usize, img.into_raw())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ColorType::Rgb8,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }

    /// Copies the `w×h` region at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<ImageBuffer> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::dims(
                format!("region inside {}x{}", self.width, self.height),
                format!("{w}x{h} at ({x0},{y0})"),
            ));
        }
        Ok(ImageBuffer::from_fn(w, h, |x, y| self.pixel(x0 + x, y0 + y)))
    }
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Area-average downsampling by `n1` rows and `n2` columns.
pub fn downsample(img: &ImageBuffer, n1: usize, n2: usize) -> Result<ImageBuffer> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("downsampling factors must be positive"));
    }
    if !img.height.is_multiple_of(n1) || !img.width.is_multiple_of(n2) {
        return Err(Error::invalid(format!(
            "{}x{} image is not divisible by factors ({n1}, {n2})",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width / n2, img.height / n1);
    let count = (n1 * n2) as u32;
    Ok(ImageBuffer::from_fn(w, h, |x, y| {
        let mut sum = [0u32; 3];
        for dy in 0..n1 {
            for dx in 0..n2 {
                let p = img.pixel(x * n2 + dx, y * n1 + dy);
                for c in 0..3 {
                    sum[c] += p[c] as u32;
                }
            }
        }
        // Round half up in integer arithmetic.
        sum.map(|s| ((2 * s + count) / (2 * count)) as u8)
    }))
}

/// Bilinear upsampling with half-pixel centers and edge clamping.
pub fn upsample(img: &ImageBuffer, n1: usize, n2: usize) -> Result<ImageBuffer> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("upsampling factors must be positive"));
    }
    let (w, h) = (img.width * n2, img.height * n1);
    let source = |o: usize, n: usize, len: usize| {
        let s = ((o as f64 + 0.5) / n as f64 - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = s.floor() as usize;
        (i0, (i0 + 1).min(len - 1), s - i0 as f64)
    };
    Ok(ImageBuffer::from_fn(w, h, |x, y| {
        let (y0, y1, wy) = source(y, n1, img.height);
        let (x0, x1, wx) = source(x, n2, img.width);
        let (a, b, c, d) = (img.pixel(x0, y0), img.pixel(x1, y0), img.pixel(x0, y1), img.pixel(x1, y1));
        let mut out = [0u8; 3];
        for ch in 0..3 {
            let top = (1.0 - wx) * a[ch] as f64 + wx * b[ch] as f64;
            let bot = (1.0 - wx) * c[ch] as f64 + wx * d[ch] as f64;
            out[ch] = to_u8((1.0 - wy) * top + wy * bot);
        }
        out
    }))
}

/// Image ↔ latent mapping (the VAE of a latent diffusion model).
pub trait LatentCodec: Send + Sync {
    fn encode(&self, img: &ImageBuffer) -> Result<Latent>;
    fn decode(&self, z: &Latent) -> Result<ImageBuffer>;
    /// Pixels per latent cell along each axis.
    fn scale(&self) -> usize;
    fn latent_channels(&self) -> usize;

    fn latent_shape(&self, width: usize, height: usize) -> Result<Shape> {
        let s = self.scale();
        if !width.is_multiple_of(s) || !height.is_multiple_of(s) {
            return Err(Error::invalid(format!(
                "{width}x{height} image is not divisible by the codec scale {s}"
            )));
        }
        Ok(Shape::new(self.latent_channels(), height / s, width / s))
    }

    fn image_size(&self, shape: Shape) -> (usize, usize) {
        (shape.width * self.scale(), shape.height * self.scale())
    }
}

impl<C: LatentCodec + ?Sized> LatentCodec for &C {
    fn encode(&self, img: &ImageBuffer) -> Result<Latent> {
        (**self).encode(img)
    }
    fn decode(&self, z: &Latent) -> Result<ImageBuffer> {
        (**self).decode(z)
    }
    fn scale(&self) -> usize {
        (**self).scale()
    }
    fn latent_channels(&self) -> usize {
        (**self).latent_channels()
    }
}

impl<C: LatentCodec + ?Sized> LatentCodec for std::sync::Arc<C> {
    fn encode(&self, img: &ImageBuffer) -> Result<Latent> {
        (**self).encode(img)
    }
    fn decode(&self, z: &Latent) -> Result<ImageBuffer> {
        (**self).decode(z)
    }
    fn scale(&self) -> usize {
        (**self).scale()
    }
    fn latent_channels(&self) -> usize {
        (**self).latent_channels()
    }
}

pub const TOY_SCALE: usize = 4;
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Pixel rescale to [−1, 1], 4×4 area pooling, channels (R, G, B, luma).
/// Decoding replicates each cell over its 4×4 block and drops the luma channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ToyCodec;

impl LatentCodec for ToyCodec {
    fn encode(&self, img: &ImageBuffer) -> Result<Latent> {
        let shape = self.latent_shape(img.width, img.height)?;
        let mut z = Latent::zeros(shape);
        let norm = 1.0 / (TOY_SCALE * TOY_SCALE) as f64;
        for y in 0..shape.height {
            for x in 0..shape.width {
                let mut acc = [0.0f64; 3];
                for dy in 0..TOY_SCALE {
                    for dx in 0..TOY_SCALE {
                        let p = img.pixel(x * TOY_SCALE + dx, y * TOY_SCALE + dy);
                        for c in 0..3 {
                            acc[c] += p[c] as f64 / 127.5 - 1.0;
                        }
                    }
                }
                let rgb = acc.map(|a| a * norm);
                for (c, v) in rgb.iter().enumerate() {
                    z.set(c, y, x, *v);
                }
                z.set(3, y, x, LUMA[0] * rgb[0] + LUMA[1] * rgb[1] + LUMA[2] * rgb[2]);
            }
        }
        Ok(z)
    }

    fn decode(&self, z: &Latent) -> Result<ImageBuffer> {
        let shape = z.shape();
        if shape.channels != 4 {
            return Err(Error::dims("4 latent channels", shape.channels));
        }
        Ok(ImageBuffer::from_fn(shape.width * TOY_SCALE, shape.height * TOY_SCALE, |x, y| {
            let (cx, cy) = (x / TOY_SCALE, y / TOY_SCALE);
            [0, 1, 2].map(|c| to_u8((z.get(c, cy, cx) + 1.0) * 127.5))
        }))
    }

    fn scale(&self) -> usize {
        TOY_SCALE
    }

    fn latent_channels(&self) -> usize {
        4
    }
}
