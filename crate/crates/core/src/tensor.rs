// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Real-valued C×H×W latent tensors and the `MLAT` file format.

use std::fmt;
use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const LATENT_MAGIC: &[u8; 4] = b"MLAT";
pub const LATENT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape {
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Channel-major, row-major latent.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    shape: Shape,
    data: Vec<f64>,
}

impl Latent {
    pub fn zeros(shape: Shape) -> Self {
        Latent {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Latent {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::dims(shape.len(), data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent contains non-finite values"));
        }
        Ok(Latent { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    data.push(f(c, y, x));
                }
            }
        }
        Latent { shape, data }
    }

    /// Seeded i.i.d. standard normal latent.
    pub fn gaussian(shape: Shape, seed: u64) -> Self {
        Latent {
            shape,
            data: crate::rng::standard_normal_vec(seed, shape.len()),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.shape.height + y) * self.shape.width + x
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    pub fn ensure_shape(&self, shape: Shape) -> Result<()> {
        if self.shape != shape {
            return Err(Error::dims(shape, self.shape));
        }
        Ok(())
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Latent, b: f64) -> Result<Latent> {
        other.ensure_shape(self.shape)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Latent {
            shape: self.shape,
            data,
        })
    }

    pub fn scaled(&self, a: f64) -> Latent {
        Latent {
            shape: self.shape,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Latent) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// ‖self − other‖ / ‖other‖.
    pub fn relative_l2(&self, other: &Latent) -> f64 {
        let num: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        num / other.l2_norm().max(f64::MIN_POSITIVE)
    }

    /// Copies the `h×w` window whose top-left corner is `(y0, x0)` in every channel.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Latent> {
        if y0 + h > self.shape.height || x0 + w > self.shape.width {
            return Err(Error::dims(
                format!("window inside {}", self.shape),
                format!("{h}x{w} at ({y0},{x0})"),
            ));
        }
        let shape = Shape::new(self.shape.channels, h, w);
        Ok(Latent::from_fn(shape, |c, y, x| self.get(c, y0 + y, x0 + x)))
    }

    pub fn paste(&mut self, y0: usize, x0: usize, patch: &Latent) -> Result<()> {
        let ps = patch.shape;
        if ps.channels != self.shape.channels
            || y0 + ps.height > self.shape.height
            || x0 + ps.width > self.shape.width
        {
            return Err(Error::dims(
                format!("patch inside {}", self.shape),
                format!("{ps} at ({y0},{x0})"),
            ));
        }
        for c in 0..ps.channels {
            for y in 0..ps.height {
                for x in 0..ps.width {
                    self.set(c, y0 + y, x0 + x, patch.get(c, y, x));
                }
            }
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(LATENT_MAGIC)?;
        w.write_all(&LATENT_VERSION.to_le_bytes())?;
        for dim in [self.shape.channels, self.shape.height, self.shape.width] {
            let dim = u32::try_from(dim).map_err(|_| Error::invalid("latent dimension exceeds u32"))?;
            w.write_all(&dim.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Latent> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != LATENT_MAGIC {
            return Err(Error::Format(format!("bad latent magic {magic:?}")));
        }
        let mut v = [0u8; 2];
        r.read_exact(&mut v)?;
        let version = u16::from_le_bytes(v);
        if version != LATENT_VERSION {
            return Err(Error::Format(format!("unsupported latent version {version}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let shape = Shape::new(dims[0], dims[1], dims[2]);
        let mut raw = vec![0u8; shape.len() * 4];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Latent::from_vec(shape, data)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Latent> {
        let f = std::fs::File::open(path)?;
        Latent::read_from(std::io::BufReader::new(f))
    }
}
