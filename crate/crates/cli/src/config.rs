// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Values may be double-quoted.
//! Lists (`priv_seeds`, `secrets`, `truth`) are comma- or space-separated.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use midas_core::channel::Degradation;
use midas_core::keymech::KeyMechanism;
use midas_core::pipeline::{BackendSpec, StegoConfig};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliConfig {
    pub n: Option<usize>,
    pub steps: Option<usize>,
    pub xi_priv: Option<f64>,
    pub xi_pub: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma_priv: Option<f64>,
    pub gamma_fuse: Option<f64>,
    pub edict_p: Option<f64>,
    pub smoothing_steps: Option<usize>,
    pub extra_denoise_steps: Option<usize>,
    pub priv_seeds: Option<Vec<u64>>,
    pub pub_seed: Option<u64>,
    pub prompt: Option<String>,
    pub ref_weight: Option<f64>,
    pub guidance: Option<f64>,
    pub joint_denoise: Option<bool>,
    pub use_edict: Option<bool>,
    pub mechanism: Option<KeyMechanism>,
    pub backend: Option<BackendSpec>,
    pub degrade: Option<Degradation>,
    pub degrade_seed: Option<u64>,
    pub user: Option<usize>,
    pub priv_seed: Option<u64>,
    pub secrets: Option<Vec<PathBuf>>,
    pub truth: Option<Vec<PathBuf>>,
    pub stego: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub outdir: Option<PathBuf>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("bad value {value:?} for {key}: {e}"))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = CliConfig::parse_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for list in [&mut cfg.secrets, &mut cfg.truth].into_iter().flatten() {
            list.iter_mut().for_each(rebase);
        }
        for p in [&mut cfg.stego, &mut cfg.out, &mut cfg.outdir].into_iter().flatten() {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn parse_str(text: &str) -> Result<Self, String> {
        let mut cfg = CliConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected `key = value`", i + 1));
            };
            cfg.set(key.trim(), unquote(value.trim()))
                .map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(cfg)
    }

    /// Sets one key; also used for `--set key=value`.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "n" => self.n = Some(parse(key, v)?),
            "steps" => self.steps = Some(parse(key, v)?),
            "xi_priv" => self.xi_priv = Some(parse(key, v)?),
            "xi_pub" => self.xi_pub = Some(parse(key, v)?),
            "alpha" => self.alpha = Some(parse(key, v)?),
            "gamma_priv" => self.gamma_priv = Some(parse(key, v)?),
            "gamma_fuse" => self.gamma_fuse = Some(parse(key, v)?),
            "edict_p" => self.edict_p = Some(parse(key, v)?),
            "smoothing_steps" => self.smoothing_steps = Some(parse(key, v)?),
            "extra_denoise_steps" => self.extra_denoise_steps = Some(parse(key, v)?),
            "priv_seeds" => self.priv_seeds = Some(list(key, v)?),
            "pub_seed" => self.pub_seed = Some(parse(key, v)?),
            "prompt" => self.prompt = Some(v.to_string()),
            "ref_weight" => self.ref_weight = Some(parse(key, v)?),
            "guidance" => self.guidance = Some(parse(key, v)?),
            "joint_denoise" => self.joint_denoise = Some(parse(key, v)?),
            "use_edict" => self.use_edict = Some(parse(key, v)?),
            "mechanism" => self.mechanism = Some(parse(key, v)?),
            "backend" => self.backend = Some(parse(key, v)?),
            "degrade" => self.degrade = Some(parse(key, v)?),
            "degrade_seed" => self.degrade_seed = Some(parse(key, v)?),
            "user" => self.user = Some(parse(key, v)?),
            "priv_seed" => self.priv_seed = Some(parse(key, v)?),
            "secrets" => self.secrets = Some(list(key, v)?),
            "truth" => self.truth = Some(list(key, v)?),
            "stego" => self.stego = Some(v.into()),
            "out" => self.out = Some(v.into()),
            "outdir" => self.outdir = Some(v.into()),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Pipeline settings for `n` secrets with this file's overrides.
    pub fn stego_config(&self, n: usize) -> Result<StegoConfig, CliError> {
        let mut c = StegoConfig::new(n).map_err(CliError::from)?;
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        take!(
            steps,
            xi_priv,
            xi_pub,
            alpha,
            gamma_priv,
            gamma_fuse,
            edict_p,
            smoothing_steps,
            extra_denoise_steps,
            priv_seeds,
            pub_seed,
            prompt,
            ref_weight,
            guidance,
            joint_denoise,
            use_edict,
            mechanism,
            backend
        );
        Ok(c)
    }
}
