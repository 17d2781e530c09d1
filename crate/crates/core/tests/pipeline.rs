// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::sync::Arc;

use midas_core::codec::{downsample, ImageBuffer, LatentCodec, ToyCodec};
use midas_core::diffusion::{Condition, NoisePredictor, StepInfo, ToyDenoiser};
use midas_core::keymech::KeyMechanism;
use midas_core::metrics::{latent_corr, psnr};
use midas_core::pipeline::{refgen, Engine, Stego, StegoConfig};
use midas_core::tensor::{Latent, Shape};

fn corpus() -> Vec<ImageBuffer> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    (0..8)
        .map(|i| ImageBuffer::load(dir.join(format!("img{i:02}.png"))).unwrap())
        .collect()
}

fn config(n: usize, seeds: &[u64]) -> StegoConfig {
    let mut cfg = StegoConfig::new(n).unwrap();
    cfg.priv_seeds = seeds.to_vec();
    cfg.pub_seed = 77;
    cfg
}

#[test]
fn hide_is_deterministic() {
    let c = corpus();
    let st = Stego::new(config(2, &[1, 2]), Engine::toy()).unwrap();
    let a = st.hide(&c[..2]).unwrap();
    let b = st.hide(&c[..2]).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.width(), a.height()), (64, 64));
    let other = Stego::new(config(2, &[1, 3]), Engine::toy()).unwrap();
    assert_ne!(other.hide(&c[..2]).unwrap(), a);
}

#[test]
fn single_secret_degenerate_round_trip() {
    let c = corpus();
    let mut cfg = config(1, &[5]);
    cfg.gamma_fuse = 0.0;
    cfg.alpha = 1.0;
    cfg.smoothing_steps = 0;
    cfg.xi_pub = cfg.xi_priv;
    let st = Stego::new(cfg, Engine::toy()).unwrap();
    for img in &c[..4] {
        let trace = st.hide_traced(std::slice::from_ref(img)).unwrap();
        let report = st.reveal_latent(&trace.z_stego, &trace.reference, 1, 5).unwrap();
        let z0 = ToyCodec.encode(img).unwrap();
        let err = report.segments[0].clean.relative_l2(&z0);
        assert!(err < 1e-2, "{err}");
    }
}

#[test]
fn no_diffusion_reveal_is_linear_round_trip() {
    let c = corpus();
    let mut cfg = config(2, &[8, 9]);
    cfg.xi_priv = 0.01;
    cfg.xi_pub = 0.01;
    cfg.smoothing_steps = 0;
    let st = Stego::new(cfg, Engine::toy()).unwrap();
    let trace = st.hide_traced(&c[2..4]).unwrap();
    for user in 1..=2 {
        let report = st.reveal_latent(&trace.z_stego, &trace.reference, user, 7 + user as u64).unwrap();
        let want = ToyCodec.encode(&downsample(&c[1 + user], 2, 1).unwrap()).unwrap();
        assert!(report.designated().clean.max_abs_diff(&want) < 1e-5);
    }
}

#[test]
fn refgen_contract() {
    let cfg = StegoConfig::new(2).unwrap();
    let engine = Engine::toy();
    let shape = Shape::new(4, 16, 16);
    let a = refgen(&engine, 4, "harbor", shape, &cfg).unwrap();
    let b = refgen(&engine, 4, "harbor", shape, &cfg).unwrap();
    assert_eq!(a.image, b.image);
    assert_eq!(a.z_ref.shape(), shape);
    let c = refgen(&engine, 5, "harbor", shape, &cfg).unwrap();
    let diff = a.image.data().iter().zip(c.image.data()).map(|(x, y)| x.abs_diff(*y)).max().unwrap();
    assert!(diff > 0);
}

#[test]
fn argument_validation() {
    let c = corpus();
    let st = Stego::new(config(2, &[1, 2]), Engine::toy()).unwrap();
    assert!(st.hide(&c[..1]).is_err());
    assert!(st.hide(&[c[0].clone(), c[1].crop(0, 0, 32, 32).unwrap()]).is_err());
    let odd = ImageBuffer::filled(60, 60, [1, 2, 3]);
    assert!(st.hide(&[odd.clone(), odd]).is_err());
    let stego = st.hide(&c[..2]).unwrap();
    assert!(st.reveal(&stego, 0, 1).is_err());
    assert!(st.reveal(&stego, 3, 1).is_err());
    let short = Stego::new(config(2, &[1]), Engine::toy()).unwrap();
    let err = short.hide(&c[..2]).unwrap_err().to_string();
    assert!(err.contains("1 private seeds given for 2 secrets"), "{err}");
}

#[test]
fn correct_key_beats_wrong_key() {
    let c = corpus();
    let st = Stego::new(config(2, &[31, 32]), Engine::toy()).unwrap();
    let trace = st.hide_traced(&c[4..6]).unwrap();
    let report = st.reveal(&trace.stego, 1, 31).unwrap();
    assert_eq!(report.segments.len(), 2);
    let own = psnr(&report.segments[0].image, &c[4]).unwrap();
    let other = psnr(&report.segments[1].image, &c[5]).unwrap();
    assert!(own > other + 3.0, "{own} vs {other}");
    let own_corr = latent_corr(&report.segments[0].latent, &trace.z_sec[0]).unwrap();
    let other_corr = latent_corr(&report.segments[1].latent, &trace.z_sec[1]).unwrap();
    assert!(own_corr > other_corr + 0.3, "{own_corr} vs {other_corr}");
}

#[test]
fn four_secrets_on_a_two_by_two_grid() {
    let c = corpus();
    let st = Stego::new(config(4, &[1, 2, 3, 4]), Engine::toy()).unwrap();
    let stego = st.hide(&c[..4]).unwrap();
    let report = st.reveal(&stego, 3, 3).unwrap();
    assert_eq!(report.segments.len(), 4);
    let psnrs: Vec<f64> = (0..4).map(|j| psnr(&report.segments[j].image, &c[j]).unwrap()).collect();
    let best = psnrs.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(psnrs[2], best, "{psnrs:?}");
}

#[test]
fn joint_denoising_is_not_worse_than_separate() {
    let c = corpus();
    let mut joint_total = 0.0;
    let mut separate_total = 0.0;
    for pair in c.chunks(2) {
        let mut cfg = config(2, &[41, 42]);
        let joint = Stego::new(cfg.clone(), Engine::toy()).unwrap();
        cfg.joint_denoise = false;
        let separate = Stego::new(cfg, Engine::toy()).unwrap();
        let stego = joint.hide(pair).unwrap();
        joint_total += psnr(&joint.reveal(&stego, 1, 41).unwrap().segments[0].image, &pair[0]).unwrap();
        separate_total += psnr(&separate.reveal(&stego, 1, 41).unwrap().segments[0].image, &pair[0]).unwrap();
    }
    assert!(joint_total >= separate_total - 1e-9, "{joint_total} vs {separate_total}");
}

struct Serialized(ToyDenoiser);

impl NoisePredictor for Serialized {
    fn predict(&self, latent: &Latent, step: StepInfo, cond: &Condition) -> midas_core::Result<Latent> {
        self.0.predict(latent, step, cond)
    }
}

#[test]
fn concurrent_and_serial_private_stages_agree() {
    let c = corpus();
    let cfg = config(2, &[51, 52]);
    let serial = Engine::new(
        Arc::new(Serialized(ToyDenoiser::default())),
        Arc::new(ToyCodec),
        Shape::new(4, 16, 16),
    );
    assert!(Engine::toy().predictor().concurrency_safe());
    let a = Stego::new(cfg.clone(), Engine::toy()).unwrap().hide(&c[..2]).unwrap();
    let b = Stego::new(cfg, serial).unwrap().hide(&c[..2]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noise_flip_and_plain_ddim_variants_run() {
    let c = corpus();
    let mut cfg = config(2, &[61, 62]);
    cfg.mechanism = KeyMechanism::NoiseFlip;
    cfg.use_edict = false;
    let st = Stego::new(cfg, Engine::toy()).unwrap();
    let stego = st.hide(&c[6..8]).unwrap();
    let report = st.reveal(&stego, 2, 62).unwrap();
    let own = psnr(&report.segments[1].image, &c[7]).unwrap();
    let other = psnr(&report.segments[0].image, &c[6]).unwrap();
    assert!(own > other, "{own} vs {other}");
}

#[test]
fn extra_denoise_keeps_reveal_usable() {
    let c = corpus();
    let mut cfg = config(2, &[71, 72]);
    let clean = Stego::new(cfg.clone(), Engine::toy()).unwrap();
    let stego = clean.hide(&c[..2]).unwrap();
    cfg.extra_denoise_steps = 5;
    let recovering = Stego::new(cfg, Engine::toy()).unwrap();
    let noisy = midas_core::channel::apply_gaussian(&stego, 5.0, 3);
    let a = psnr(&clean.reveal(&stego, 1, 71).unwrap().segments[0].image, &c[0]).unwrap();
    let b = psnr(&recovering.reveal(&noisy, 1, 71).unwrap().segments[0].image, &c[0]).unwrap();
    assert!((a - b).abs() < 4.0, "{a} vs {b}");
}
