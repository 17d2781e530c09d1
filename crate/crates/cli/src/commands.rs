// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use midas_core::backend::{EchoServer, BACKEND_ENV};
use midas_core::codec::ImageBuffer;
use midas_core::metrics::{latent_corr, psnr, ssim, write_csv, MetricReport};
use midas_core::pipeline::{refgen, BackendSpec, Engine, Stego, StegoConfig};

use crate::config::CliConfig;
use crate::{Cli, CliError, Command, SweepParam};

/// One sweep result row.
struct SweepRow {
    param: &'static str,
    value: f64,
    stego_psnr_ref: f64,
    stego_ssim_ref: f64,
    correct_psnr: f64,
    wrong_psnr: Option<f64>,
    correct_corr: f64,
    wrong_corr: Option<f64>,
}

fn io_err(what: &str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{what} {}: {e}", path.display()))
}

fn load_image(path: &Path) -> Result<ImageBuffer, CliError> {
    ImageBuffer::load(path).map_err(|e| io_err("cannot read image", path, e))
}

fn save_image(img: &ImageBuffer, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err("cannot create directory", dir, e))?;
    }
    img.save_png(path).map_err(|e| io_err("cannot write image", path, e))
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing required {flag}")))
}

fn resolve_backend(flag: Option<BackendSpec>, file: &CliConfig) -> Result<BackendSpec, CliError> {
    if let Some(b) = flag.or_else(|| file.backend.clone()) {
        return Ok(b);
    }
    match std::env::var(BACKEND_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let v = v.trim();
            let spec = if v == "toy" || v.starts_with("tcp:") {
                v.to_string()
            } else {
                format!("tcp:{v}")
            };
            spec.parse()
                .map_err(|e| CliError::Usage(format!("${BACKEND_ENV}: {e}")))
        }
        _ => Ok(BackendSpec::Toy),
    }
}

struct Context {
    file: CliConfig,
    backend: BackendSpec,
}

impl Context {
    fn engine(&self) -> Result<Engine, CliError> {
        Ok(Engine::from_spec(&self.backend)?)
    }

    fn stego_config(&self, n: usize) -> Result<StegoConfig, CliError> {
        let mut cfg = self.file.stego_config(n)?;
        cfg.backend = self.backend.clone();
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut file = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        file.set(k.trim(), v.trim()).map_err(|e| CliError::Usage(format!("--set: {e}")))?;
    }
    let backend = resolve_backend(cli.backend, &file)?;
    let ctx = Context { file, backend };
    match cli.cmd {
        Command::Hide {
            secrets,
            priv_seeds,
            pub_seed,
            prompt,
            out,
        } => hide(&ctx, secrets, priv_seeds, pub_seed, prompt, out),
        Command::Reveal {
            stego,
            user,
            priv_seed,
            pub_seed,
            prompt,
            outdir,
            n,
            degrade,
            degrade_seed,
            extra_denoise,
            truth,
        } => {
            let f = &ctx.file;
            let truth = if truth.is_empty() { f.truth.clone().unwrap_or_default() } else { truth };
            let n = n.or(f.n).unwrap_or(if truth.is_empty() { 2 } else { truth.len() });
            let mut cfg = ctx.stego_config(n)?;
            if let Some(s) = pub_seed {
                cfg.pub_seed = s;
            }
            if let Some(p) = prompt {
                cfg.prompt = p;
            }
            if let Some(k) = extra_denoise {
                cfg.extra_denoise_steps = k;
            }
            let job = RevealJob {
                stego: required(stego.or_else(|| f.stego.clone()), "--stego")?,
                user: required(user.or(f.user), "--user")?,
                priv_seed: required(priv_seed.or(f.priv_seed), "--priv-seed")?,
                outdir: required(outdir.or_else(|| f.outdir.clone()), "--outdir")?,
                degrade: degrade.or(f.degrade),
                degrade_seed: degrade_seed.or(f.degrade_seed).unwrap_or(0),
                truth,
            };
            reveal(&ctx, cfg, job)
        }
        Command::Refgen {
            pub_seed,
            prompt,
            out,
            size,
            latent_out,
        } => {
            let out = required(out.or_else(|| ctx.file.out.clone()), "--out")?;
            let mut cfg = ctx.stego_config(1)?;
            if let Some(s) = pub_seed {
                cfg.pub_seed = s;
            }
            if let Some(p) = prompt {
                cfg.prompt = p;
            }
            cfg.validate()?;
            let engine = ctx.engine()?;
            let shape = match size {
                Some(s) => {
                    let (w, h) = s
                        .split_once('x')
                        .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
                        .ok_or_else(|| CliError::Usage(format!("--size expects WxH, got {s:?}")))?;
                    engine.codec().latent_shape(w, h)?
                }
                None => engine.native_shape(),
            };
            let reference = refgen(&engine, cfg.pub_seed, &cfg.prompt, shape, &cfg)?;
            save_image(&reference.image, &out)?;
            if let Some(path) = latent_out {
                reference
                    .z_ref
                    .save(&path)
                    .map_err(|e| io_err("cannot write latent", &path, e))?;
            }
            println!("{}", out.display());
            Ok(())
        }
        Command::Eval { pairs, out } => eval(&pairs, &out),
        Command::Sweep {
            param,
            values,
            secrets,
            priv_seeds,
            pub_seed,
            prompt,
            out,
        } => sweep(&ctx, param, values, secrets, priv_seeds, pub_seed, prompt, out),
        Command::EchoServer { listen } => {
            let server = EchoServer::bind(&listen).map_err(|e| CliError::Io(format!("cannot bind {listen}: {e}")))?;
            let addr = server.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
            println!("listening on {addr}");
            std::io::stdout().flush().ok();
            server.serve();
            Ok(())
        }
    }
}

/// Merges secrets and seeds from flags and the config file and checks counts.
fn hide_inputs(ctx: &Context, secrets: Vec<PathBuf>, priv_seeds: Vec<u64>) -> Result<(Vec<PathBuf>, Vec<u64>), CliError> {
    let secrets = if secrets.is_empty() { ctx.file.secrets.clone().unwrap_or_default() } else { secrets };
    let seeds = if priv_seeds.is_empty() { ctx.file.priv_seeds.clone().unwrap_or_default() } else { priv_seeds };
    if secrets.is_empty() {
        return Err(CliError::Usage("missing required --secrets".into()));
    }
    if seeds.len() != secrets.len() {
        return Err(CliError::Usage(format!(
            "--priv-seeds has {} value(s) but --secrets has {}",
            seeds.len(),
            secrets.len()
        )));
    }
    if let Some(n) = ctx.file.n.filter(|&n| n != secrets.len()) {
        return Err(CliError::Usage(format!("config says n = {n} but {} secrets were given", secrets.len())));
    }
    Ok((secrets, seeds))
}

fn hide(
    ctx: &Context,
    secrets: Vec<PathBuf>,
    priv_seeds: Vec<u64>,
    pub_seed: Option<u64>,
    prompt: Option<String>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let (secrets, seeds) = hide_inputs(ctx, secrets, priv_seeds)?;
    let out = required(out.or_else(|| ctx.file.out.clone()), "--out")?;
    let mut cfg = ctx.stego_config(secrets.len())?;
    cfg.priv_seeds = seeds;
    if let Some(s) = pub_seed {
        cfg.pub_seed = s;
    }
    if let Some(p) = prompt {
        cfg.prompt = p;
    }
    cfg.validate_for_hide()?;
    let images = secrets.iter().map(|p| load_image(p)).collect::<Result<Vec<_>, _>>()?;
    let stego = Stego::new(cfg, ctx.engine()?)?.hide(&images)?;
    save_image(&stego, &out)?;
    println!("{}", out.display());
    Ok(())
}

struct RevealJob {
    stego: PathBuf,
    user: usize,
    priv_seed: u64,
    outdir: PathBuf,
    degrade: Option<midas_core::channel::Degradation>,
    degrade_seed: u64,
    truth: Vec<PathBuf>,
}

fn reveal(ctx: &Context, cfg: StegoConfig, job: RevealJob) -> Result<(), CliError> {
    let n = cfg.n;
    if job.user == 0 || job.user > n {
        return Err(CliError::Usage(format!("--user {} outside 1..={n}", job.user)));
    }
    if !job.truth.is_empty() && job.truth.len() != n {
        return Err(CliError::Usage(format!(
            "--truth has {} image(s) but {n} are hidden",
            job.truth.len()
        )));
    }
    cfg.validate()?;
    let mut received = load_image(&job.stego)?;
    fs::create_dir_all(&job.outdir).map_err(|e| io_err("cannot create directory", &job.outdir, e))?;
    if let Some(d) = job.degrade {
        received = d.apply(&received, job.degrade_seed)?;
        save_image(&received, &job.outdir.join("received.png"))?;
    }
    let report = Stego::new(cfg, ctx.engine()?)?.reveal(&received, job.user, job.priv_seed)?;
    for seg in &report.segments {
        let path = job.outdir.join(format!("segment_{}.png", seg.index));
        save_image(&seg.image, &path)?;
        let tag = if seg.index == job.user { " (designated)" } else { "" };
        println!(
            "segment {}{tag}: {} corr_vs_undecrypted={:.4}",
            seg.index,
            path.display(),
            seg.corr_vs_undecrypted
        );
    }
    if !job.truth.is_empty() {
        let rows = report
            .segments
            .iter()
            .zip(&job.truth)
            .map(|(seg, t)| {
                let truth = load_image(t)?;
                Ok(MetricReport::compare(format!("segment_{}", seg.index), &truth, &seg.image)?)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let path = job.outdir.join("metrics.csv");
        let file = fs::File::create(&path).map_err(|e| io_err("cannot write", &path, e))?;
        write_csv(file, &rows)?;
        for r in &rows {
            println!("{}: psnr={:.3} ssim={:.4}", r.name, r.psnr, r.ssim);
        }
    }
    Ok(())
}

fn eval(pairs: &Path, out: &Path) -> Result<(), CliError> {
    let base = pairs.parent().unwrap_or(Path::new(""));
    let mut reader = csv::Reader::from_path(pairs).map_err(|e| io_err("cannot read manifest", pairs, e))?;
    let headers = reader.headers().map_err(|e| io_err("bad manifest", pairs, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Usage(format!("{}: manifest needs a `{name}` column", pairs.display())))
    };
    let (ni, ri, ci) = (col("name")?, col("reference")?, col("candidate")?);
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_err("bad manifest", pairs, e))?;
        let field = |i: usize| {
            record
                .get(i)
                .map(str::trim)
                .ok_or_else(|| CliError::Usage(format!("{}: row {} is short", pairs.display(), line + 2)))
        };
        let reference = load_image(&base.join(field(ri)?))?;
        let candidate = load_image(&base.join(field(ci)?))?;
        rows.push(MetricReport::compare(field(ni)?, &reference, &candidate)?);
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err("cannot create directory", dir, e))?;
    }
    let file = fs::File::create(out).map_err(|e| io_err("cannot write", out, e))?;
    write_csv(file, &rows)?;
    println!("{} pair(s) -> {}", rows.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    ctx: &Context,
    param: SweepParam,
    values: Vec<f64>,
    secrets: Vec<PathBuf>,
    priv_seeds: Vec<u64>,
    pub_seed: Option<u64>,
    prompt: Option<String>,
    out: PathBuf,
) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("--values needs at least one value".into()));
    }
    let (secrets, seeds) = hide_inputs(ctx, secrets, priv_seeds)?;
    let images = secrets.iter().map(|p| load_image(p)).collect::<Result<Vec<_>, _>>()?;
    let engine = ctx.engine()?;
    let n = images.len();
    let mut rows = Vec::new();
    for &value in &values {
        let mut cfg = ctx.stego_config(n)?;
        cfg.priv_seeds = seeds.clone();
        if let Some(s) = pub_seed {
            cfg.pub_seed = s;
        }
        if let Some(p) = &prompt {
            cfg.prompt = p.clone();
        }
        let name = match param {
            SweepParam::Alpha => {
                cfg.alpha = value;
                "alpha"
            }
            SweepParam::GammaPriv => {
                cfg.gamma_priv = value;
                "gamma_priv"
            }
            SweepParam::GammaFuse => {
                cfg.gamma_fuse = value;
                "gamma_fuse"
            }
        };
        let st = Stego::new(cfg, engine.clone())?;
        let trace = st.hide_traced(&images)?;
        let (mut cp, mut wp, mut cc, mut wc, mut wn) = (0.0, 0.0, 0.0, 0.0, 0usize);
        for user in 1..=n {
            let report = st.reveal(&trace.stego, user, seeds[user - 1])?;
            for seg in &report.segments {
                let p = psnr(&seg.image, &images[seg.index - 1])?;
                let c = latent_corr(&seg.latent, &trace.z_sec[seg.index - 1])?;
                if seg.index == user {
                    cp += p;
                    cc += c;
                } else {
                    wp += p;
                    wc += c;
                    wn += 1;
                }
            }
        }
        let stego_ref = &trace.reference.image;
        rows.push(SweepRow {
            param: name,
            value,
            stego_psnr_ref: psnr(&trace.stego, stego_ref)?,
            stego_ssim_ref: ssim(&trace.stego, stego_ref)?,
            correct_psnr: cp / n as f64,
            wrong_psnr: (wn > 0).then(|| wp / wn as f64),
            correct_corr: cc / n as f64,
            wrong_corr: (wn > 0).then(|| wc / wn as f64),
        });
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err("cannot create directory", dir, e))?;
    }
    let mut w = csv::Writer::from_path(&out).map_err(|e| io_err("cannot write", &out, e))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let header = [
        "param",
        "value",
        "stego_psnr_ref",
        "stego_ssim_ref",
        "correct_psnr",
        "wrong_psnr",
        "correct_corr",
        "wrong_corr",
    ];
    w.write_record(header).map_err(|e| io_err("cannot write", &out, e))?;
    for r in &rows {
        w.write_record([
            r.param.to_string(),
            r.value.to_string(),
            r.stego_psnr_ref.to_string(),
            r.stego_ssim_ref.to_string(),
            r.correct_psnr.to_string(),
            opt(r.wrong_psnr),
            r.correct_corr.to_string(),
            opt(r.wrong_corr),
        ])
        .map_err(|e| io_err("cannot write", &out, e))?;
        println!(
            "{}={}: correct {:.2} dB, wrong {} dB, stego vs reference {:.2} dB",
            r.param,
            r.value,
            r.correct_psnr,
            r.wrong_psnr.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
            r.stego_psnr_ref
        );
    }
    w.flush().map_err(|e| io_err("cannot write", &out, e))?;
    Ok(())
}
