// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! `midas`: hide several images in one generated image and recover them
//! per key holder.
//!
//! Exit codes: 0 success, 1 usage error, 2 backend error, 3 I/O error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use midas_core::channel::Degradation;
use midas_core::pipeline::BackendSpec;

#[derive(Debug, Parser)]
#[command(name = "midas", version, about = "Multi-image coverless steganography over diffusion latents")]
struct Cli {
    /// `toy` or `tcp:<host:port>`; falls back to the config file, then $MIDAS_BACKEND, then `toy`.
    #[arg(long, global = true)]
    backend: Option<BackendSpec>,

    /// `key = value` file; command-line flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override any config key, e.g. `--set alpha=0.9`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    #[value(name = "alpha")]
    Alpha,
    #[value(name = "gamma_priv")]
    GammaPriv,
    #[value(name = "gamma_fuse")]
    GammaFuse,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hide N secret images in one stego image.
    Hide {
        #[arg(long, num_args = 1..)]
        secrets: Vec<PathBuf>,
        /// One private seed per secret, in the same order.
        #[arg(long, num_args = 1..)]
        priv_seeds: Vec<u64>,
        #[arg(long)]
        pub_seed: Option<u64>,
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover all segments as seen by one key holder.
    Reveal {
        #[arg(long)]
        stego: Option<PathBuf>,
        /// 1-based index of the key holder.
        #[arg(long)]
        user: Option<usize>,
        #[arg(long)]
        priv_seed: Option<u64>,
        #[arg(long)]
        pub_seed: Option<u64>,
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long)]
        outdir: Option<PathBuf>,
        /// Number of hidden images.
        #[arg(long)]
        n: Option<usize>,
        /// Channel degradation applied before recovery: `gaussian:<sigma>` or `jpeg:<quality>`.
        #[arg(long)]
        degrade: Option<Degradation>,
        #[arg(long)]
        degrade_seed: Option<u64>,
        /// Denoising steps applied to the received image before inversion.
        #[arg(long)]
        extra_denoise: Option<usize>,
        /// Original secrets; when given, `metrics.csv` is written to the output directory.
        #[arg(long, num_args = 1..)]
        truth: Vec<PathBuf>,
    },
    /// Generate the public reference image.
    Refgen {
        #[arg(long)]
        pub_seed: Option<u64>,
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Image size `WxH`; defaults to the backend's native size.
        #[arg(long)]
        size: Option<String>,
        /// Also write the inverted reference latent.
        #[arg(long)]
        latent_out: Option<PathBuf>,
    },
    /// Compute metrics over a manifest of image pairs (`name,reference,candidate`).
    Eval {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hide and reveal once per parameter value and tabulate the trade-off.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, num_args = 1..)]
        secrets: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        priv_seeds: Vec<u64>,
        #[arg(long)]
        pub_seed: Option<u64>,
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the loopback echo backend.
    EchoServer {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Backend(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Backend(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Backend(m) | CliError::Io(m) => m,
        }
    }
}

impl From<midas_core::Error> for CliError {
    fn from(e: midas_core::Error) -> Self {
        use midas_core::Error as E;
        match e {
            E::Backend(_) => CliError::Backend(e.to_string()),
            E::Io(_) | E::Image(_) | E::Format(_) => CliError::Io(e.to_string()),
            E::InvalidArgument(_) | E::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("midas: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
