// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use crate::diffusion::{Schedule, TRAIN_STEPS};
use crate::error::{Error, Result};
use crate::keymech::KeyMechanism;

/// `(n1, n2)` grid for `n` secrets: `n1` is the smallest power of two with
/// `n1² ≥ n`, and `n2 = n / n1` must be whole.
pub fn split_factors(n: usize) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(Error::invalid("at least one secret is required"));
    }
    let mut n1 = 1usize;
    while n1 * n1 < n {
        n1 *= 2;
    }
    if !n.is_multiple_of(n1) {
        return Err(Error::invalid(format!(
            "{n} secrets cannot be tiled: {n1} rows do not divide {n}"
        )));
    }
    Ok((n1, n / n1))
}

/// Which denoiser and codec to run against.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum BackendSpec {
    #[default]
    Toy,
    /// `host:port` of a protocol server.
    Tcp(String),
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(BackendSpec::Toy),
            _ => match s.strip_prefix("tcp:") {
                Some(addr) if !addr.is_empty() => Ok(BackendSpec::Tcp(addr.to_string())),
                _ => Err(Error::invalid(format!("backend {s:?} is neither \"toy\" nor \"tcp:<host:port>\""))),
            },
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Toy => f.write_str("toy"),
            BackendSpec::Tcp(addr) => write!(f, "tcp:{addr}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StegoConfig {
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub steps: usize,
    pub xi_priv: f64,
    pub xi_pub: f64,
    pub alpha: f64,
    pub gamma_priv: f64,
    pub gamma_fuse: f64,
    pub edict_p: f64,
    pub smoothing_steps: usize,
    pub extra_denoise_steps: usize,
    pub priv_seeds: Vec<u64>,
    pub pub_seed: u64,
    pub prompt: String,
    /// Weight of the reference latent in the public condition.
    pub ref_weight: f64,
    pub guidance: f64,
    pub joint_denoise: bool,
    /// EDICT on the two inversion paths; plain DDIM otherwise.
    pub use_edict: bool,
    pub mechanism: KeyMechanism,
    pub backend: BackendSpec,
}

impl StegoConfig {
    /// Defaults for `n` secrets.
    pub fn new(n: usize) -> Result<Self> {
        let (n1, n2) = split_factors(n)?;
        Ok(StegoConfig {
            n,
            n1,
            n2,
            steps: 50,
            xi_priv: 0.4,
            xi_pub: 0.7,
            alpha: 0.95,
            gamma_priv: if n == 1 { 0.5 } else { 0.4 },
            gamma_fuse: if n == 1 { 0.0 } else { 0.5 },
            edict_p: 0.93,
            smoothing_steps: 5,
            extra_denoise_steps: 0,
            priv_seeds: Vec::new(),
            pub_seed: 0,
            prompt: String::new(),
            ref_weight: 0.5,
            guidance: 1.0,
            joint_denoise: true,
            use_edict: true,
            mechanism: KeyMechanism::RandomBasis,
            backend: BackendSpec::Toy,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        if self.n1 * self.n2 != self.n || self.n == 0 {
            return Err(Error::invalid(format!(
                "grid {}x{} does not hold {} secrets",
                self.n1, self.n2, self.n
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha = {} outside (0, 1]", self.alpha)));
        }
        unit("gamma_priv", self.gamma_priv)?;
        unit("gamma_fuse", self.gamma_fuse)?;
        unit("ref_weight", self.ref_weight)?;
        if !(self.edict_p > 0.5 && self.edict_p <= 1.0) {
            return Err(Error::invalid(format!("edict_p = {} outside (0.5, 1]", self.edict_p)));
        }
        let sched = self.schedule()?;
        sched.with_xi(self.xi_pub)?;
        if self.private_window() + self.smoothing_steps > self.steps {
            return Err(Error::invalid(format!(
                "private window {} plus {} smoothing steps exceeds T = {}",
                self.private_window(),
                self.smoothing_steps,
                self.steps
            )));
        }
        if self.extra_denoise_steps > self.steps {
            return Err(Error::invalid(format!(
                "extra_denoise_steps = {} exceeds T = {}",
                self.extra_denoise_steps, self.steps
            )));
        }
        Ok(())
    }

    /// Checks that there is one private seed per secret.
    pub fn validate_for_hide(&self) -> Result<()> {
        self.validate()?;
        if self.priv_seeds.len() != self.n {
            return Err(Error::invalid(format!(
                "{} private seeds given for {} secrets",
                self.priv_seeds.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Schedule with the private-stage fraction.
    pub fn schedule(&self) -> Result<Schedule> {
        if self.steps == 0 || self.steps > TRAIN_STEPS {
            return Err(Error::invalid(format!("T = {} outside 1..={TRAIN_STEPS}", self.steps)));
        }
        Schedule::new(self.steps, self.xi_priv)
    }

    pub fn private_window(&self) -> usize {
        (self.xi_priv * self.steps as f64).floor() as usize
    }

    pub fn public_window(&self) -> usize {
        (self.xi_pub * self.steps as f64).floor() as usize
    }
}
