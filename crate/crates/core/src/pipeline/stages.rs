// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;
use std::thread;

use super::config::{BackendSpec, StegoConfig};
use super::layout::{decompose, fuse, tile, untile};
use crate::backend::RemoteBackend;
use crate::codec::{downsample, upsample, ImageBuffer, LatentCodec, ToyCodec};
use crate::diffusion::{
    ddim_denoise, ddim_invert, edict_denoise, edict_invert, Condition, Coupled, NoisePredictor, Schedule, ToyDenoiser,
};
use crate::error::{Error, Result};
use crate::keymech::{Cipher, OrthoKey};
use crate::metrics::latent_corr;
use crate::tensor::{Latent, Shape};

/// Toy images are 64×64, latents 4×16×16.
const TOY_NATIVE: Shape = Shape::new(4, 16, 16);

/// A noise predictor paired with a codec.
#[derive(Clone)]
pub struct Engine {
    predictor: Arc<dyn NoisePredictor>,
    codec: Arc<dyn LatentCodec>,
    native: Shape,
}

impl Engine {
    pub fn new(predictor: Arc<dyn NoisePredictor>, codec: Arc<dyn LatentCodec>, native: Shape) -> Self {
        Engine {
            predictor,
            codec,
            native,
        }
    }

    pub fn toy() -> Self {
        Engine::new(Arc::new(ToyDenoiser::default()), Arc::new(ToyCodec), TOY_NATIVE)
    }

    pub fn remote(addr: &str) -> Result<Self> {
        let backend = Arc::new(RemoteBackend::connect_pool(addr, 4)?);
        let [c, h, w] = backend.info().latent_shape;
        Ok(Engine::new(backend.clone(), backend, Shape::new(c, h, w)))
    }

    pub fn from_spec(spec: &BackendSpec) -> Result<Self> {
        match spec {
            BackendSpec::Toy => Ok(Engine::toy()),
            BackendSpec::Tcp(addr) => Engine::remote(addr),
        }
    }

    pub fn predictor(&self) -> &dyn NoisePredictor {
        &*self.predictor
    }

    pub fn codec(&self) -> &dyn LatentCodec {
        &*self.codec
    }

    /// Latent shape at the backend's native image size.
    pub fn native_shape(&self) -> Shape {
        self.native
    }

    /// `(width, height)` of images at the native size.
    pub fn native_image_size(&self) -> (usize, usize) {
        self.codec.image_size(self.native)
    }
}

/// The public reference: never transmitted, regenerated by both sides.
#[derive(Debug, Clone)]
pub struct Reference {
    pub image: ImageBuffer,
    /// `encode(image)`, conditions the public stage.
    pub latent: Latent,
    /// `latent` inverted to the private window; blended in by fusion.
    pub z_ref: Latent,
}

/// Seeded noise, denoised under `prompt`, decoded; then re-encoded and
/// inverted to the private window.
pub fn refgen(engine: &Engine, pub_seed: u64, prompt: &str, shape: Shape, cfg: &StegoConfig) -> Result<Reference> {
    let sched = cfg.schedule()?;
    let pred = engine.predictor();
    let cond = Condition::prompt(prompt);
    let noise = Latent::gaussian(shape, pub_seed);
    let z0 = ddim_denoise(&noise, sched.steps(), 0, pred, &cond, &sched)?;
    let image = engine.codec().decode(&z0)?;
    let latent = engine.codec().encode(&image)?;
    latent.ensure_shape(shape)?;
    let z_ref = ddim_invert(&latent, 0, cfg.private_window(), pred, &cond, &sched)?;
    Ok(Reference { image, latent, z_ref })
}


/// Intermediate latents of one hide run.
#[derive(Debug, Clone)]
pub struct HideTrace {
    /// Per secret, at the private window, before encryption.
    pub z_sec: Vec<Latent>,
    /// Tiled protected latent (after encryption and smoothing).
    pub z_prot: Latent,
    pub z_pub: Latent,
    /// Denoised latent that is decoded into the stego image.
    pub z_stego: Latent,
    pub stego: ImageBuffer,
    pub reference: Reference,
}

#[derive(Debug, Clone)]
pub struct RevealedSegment {
    /// 1-based.
    pub index: usize,
    pub image: ImageBuffer,
    /// Decrypted latent at the private window.
    pub latent: Latent,
    /// `latent` denoised to step 0; what `image` is decoded from.
    pub clean: Latent,
    /// Correlation between the decrypted and the still-encrypted latent.
    pub corr_vs_undecrypted: f64,
}

#[derive(Debug, Clone)]
pub struct RevealReport {
    /// 1-based designated user.
    pub user: usize,
    pub segments: Vec<RevealedSegment>,
}

impl RevealReport {
    pub fn designated(&self) -> &RevealedSegment {
        &self.segments[self.user - 1]
    }
}

/// A configured hide/reveal job.
pub struct Stego {
    cfg: StegoConfig,
    engine: Engine,
    sched: Schedule,
}

impl Stego {
    pub fn new(cfg: StegoConfig, engine: Engine) -> Result<Self> {
        cfg.validate()?;
        let sched = cfg.schedule()?;
        Ok(Stego { cfg, engine, sched })
    }

    pub fn config(&self) -> &StegoConfig {
        &self.cfg
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn null_cond(&self) -> Condition {
        Condition {
            guidance: self.cfg.guidance,
            ..Condition::null()
        }
    }

    fn public_cond(&self, reference: &Reference) -> Condition {
        Condition {
            guidance: self.cfg.guidance,
            ..Condition::prompt(&self.cfg.prompt).with_reference(reference.latent.clone(), self.cfg.ref_weight)
        }
    }

    /// Reference for a full-size latent of `shape`.
    pub fn reference(&self, shape: Shape) -> Result<Reference> {
        refgen(&self.engine, self.cfg.pub_seed, &self.cfg.prompt, shape, &self.cfg)
    }

    fn public_key(&self, d: usize) -> Result<OrthoKey> {
        OrthoKey::build(d, self.cfg.gamma_fuse, self.cfg.pub_seed)
    }

    fn private_key(&self, d: usize, seed: u64) -> Result<Cipher> {
        Cipher::build(self.cfg.mechanism, d, self.cfg.gamma_priv, seed)
    }

    fn full_shape(&self, width: usize, height: usize) -> Result<Shape> {
        let (n1, n2) = (self.cfg.n1, self.cfg.n2);
        let step = self.engine.codec().scale();
        if !height.is_multiple_of(n1 * step) || !width.is_multiple_of(n2 * step) {
            return Err(Error::dims(
                format!("height divisible by {}, width by {}", n1 * step, n2 * step),
                format!("{width}x{height}"),
            ));
        }
        self.engine.codec().latent_shape(width, height)
    }

    /// Runs `f` on each item, concurrently when the backend allows it.
    fn per_segment<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(usize, &T) -> Result<R> + Sync) -> Result<Vec<R>> {
        if items.len() > 1 && self.engine.predictor().concurrency_safe() {
            thread::scope(|s| {
                let handles: Vec<_> = items.iter().enumerate().map(|(i, t)| {
                    let f = &f;
                    s.spawn(move || f(i, t))
                }).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                    .collect()
            })
        } else {
            items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
    }

    pub fn hide(&self, secrets: &[ImageBuffer]) -> Result<ImageBuffer> {
        Ok(self.hide_traced(secrets)?.stego)
    }

    pub fn hide_traced(&self, secrets: &[ImageBuffer]) -> Result<HideTrace> {
        self.cfg.validate_for_hide()?;
        if secrets.len() != self.cfg.n {
            return Err(Error::invalid(format!(
                "{} secrets given, configuration expects {}",
                secrets.len(),
                self.cfg.n
            )));
        }
        for s in &secrets[1..] {
            secrets[0].same_dims(s)?;
        }
        let full = self.full_shape(secrets[0].width(), secrets[0].height())?;
        let reference = self.reference(full)?;
        let z_sec = self.per_segment(secrets, |_, img| {
            let z0 = self.engine.codec().encode(&downsample(img, self.cfg.n1, self.cfg.n2)?)?;
            self.private_invert(&z0)
        })?;
        let (z_pub, z_prot) = self.fuse_latents(&z_sec, &reference)?;
        let z_stego = self.public_denoise(&z_pub, &reference)?;
        let stego = self.engine.codec().decode(&z_stego)?;
        Ok(HideTrace {
            z_sec,
            z_prot,
            z_pub,
            z_stego,
            stego,
            reference,
        })
    }

    /// Encoded secret segment → private-window latent.
    fn private_invert(&self, z0: &Latent) -> Result<Latent> {
        let (w, pred, null) = (self.cfg.private_window(), self.engine.predictor(), self.null_cond());
        if self.cfg.use_edict {
            Ok(edict_invert(Coupled::twin(z0.clone()), 0, w, pred, &null, &self.sched, self.cfg.edict_p)?.x)
        } else {
            ddim_invert(z0, 0, w, pred, &null, &self.sched)
        }
    }

    /// Encrypts, smooths, tiles and fuses the private-window segments.
    /// Returns `(z_pub, z_prot)`.
    pub fn fuse_latents(&self, z_sec: &[Latent], reference: &Reference) -> Result<(Latent, Latent)> {
        self.cfg.validate_for_hide()?;
        let w = self.cfg.private_window();
        let smoothed = self.per_segment(z_sec, |i, z| {
            let key = self.private_key(z.len(), self.cfg.priv_seeds[i])?;
            let enc = Latent::from_vec(z.shape(), key.encrypt(z.data())?)?;
            ddim_invert(
                &enc,
                w,
                w + self.cfg.smoothing_steps,
                self.engine.predictor(),
                &self.null_cond(),
                &self.sched,
            )
        })?;
        let z_prot = tile(&smoothed, self.cfg.n1, self.cfg.n2)?;
        let z_pub = fuse(&z_prot, &reference.z_ref, self.cfg.alpha, &self.public_key(z_prot.len())?)?;
        Ok((z_pub, z_prot))
    }

    fn public_denoise(&self, z_pub: &Latent, reference: &Reference) -> Result<Latent> {
        let (w, pred, cond) = (self.cfg.public_window(), self.engine.predictor(), self.public_cond(reference));
        if self.cfg.use_edict {
            Ok(edict_denoise(Coupled::twin(z_pub.clone()), w, 0, pred, &cond, &self.sched, self.cfg.edict_p)?.x)
        } else {
            ddim_denoise(z_pub, w, 0, pred, &cond, &self.sched)
        }
    }

    fn public_invert(&self, z: &Latent, reference: &Reference) -> Result<Latent> {
        let (w, pred, cond) = (self.cfg.public_window(), self.engine.predictor(), self.public_cond(reference));
        if self.cfg.use_edict {
            // Only one track survives decoding; averaging the re-inverted
            // pair cancels most of the first-order collapse error.
            let pair = edict_invert(Coupled::twin(z.clone()), 0, w, pred, &cond, &self.sched, self.cfg.edict_p)?;
            pair.x.lin_comb(0.5, &pair.y, 0.5)
        } else {
            ddim_invert(z, 0, w, pred, &cond, &self.sched)
        }
    }

    pub fn reveal(&self, stego: &ImageBuffer, user: usize, priv_seed: u64) -> Result<RevealReport> {
        let full = self.full_shape(stego.width(), stego.height())?;
        let z = self.engine.codec().encode(stego)?;
        z.ensure_shape(full)?;
        let reference = self.reference(full)?;
        self.reveal_latent(&z, &reference, user, priv_seed)
    }

    /// Reconstruction from the encoded stego latent.
    pub fn reveal_latent(
        &self,
        z_received: &Latent,
        reference: &Reference,
        user: usize,
        priv_seed: u64,
    ) -> Result<RevealReport> {
        if user == 0 || user > self.cfg.n {
            return Err(Error::invalid(format!("user {user} outside 1..={}", self.cfg.n)));
        }
        z_received.ensure_shape(reference.z_ref.shape())?;
        let pred = self.engine.predictor();
        let null = self.null_cond();
        let mut z = z_received.clone();
        let k = self.cfg.extra_denoise_steps;
        if k > 0 {
            z = ddim_denoise(&z, k, 0, pred, &self.public_cond(reference), &self.sched)?;
        }
        let z_tilde = self.public_invert(&z, reference)?;
        let z_hat_prot = decompose(
            &z_tilde,
            &reference.z_ref,
            self.cfg.alpha,
            &self.public_key(z_tilde.len())?,
        )?;
        let w = self.cfg.private_window();
        let z_hat_prot = ddim_denoise(&z_hat_prot, w + self.cfg.smoothing_steps, w, pred, &null, &self.sched)?;

        let (n1, n2) = (self.cfg.n1, self.cfg.n2);
        let encrypted = untile(&z_hat_prot, n1, n2)?;
        let key = self.private_key(encrypted[0].len(), priv_seed)?;
        let decrypted = encrypted
            .iter()
            .map(|seg| Latent::from_vec(seg.shape(), key.decrypt(seg.data())?))
            .collect::<Result<Vec<_>>>()?;

        let clean = if self.cfg.joint_denoise {
            let joint = ddim_denoise(&tile(&decrypted, n1, n2)?, w, 0, pred, &null, &self.sched)?;
            untile(&joint, n1, n2)?
        } else {
            self.per_segment(&decrypted, |_, seg| ddim_denoise(seg, w, 0, pred, &null, &self.sched))?
        };

        let segments = clean
            .iter()
            .zip(decrypted)
            .zip(&encrypted)
            .enumerate()
            .map(|(j, ((z0, dec), enc))| {
                let image = upsample(&self.engine.codec().decode(z0)?, n1, n2)?;
                Ok(RevealedSegment {
                    index: j + 1,
                    image,
                    corr_vs_undecrypted: latent_corr(&dec, enc)?,
                    latent: dec,
                    clean: z0.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RevealReport { user, segments })
    }
}
