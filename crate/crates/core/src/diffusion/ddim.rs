// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic (η = 0) DDIM sampling and its first-order inversion.

use crate::error::{Error, Result};
use crate::tensor::Latent;

use super::{Condition, NoisePredictor, Schedule};

fn predict_checked<P: NoisePredictor + ?Sized>(
    pred: &P,
    z: &Latent,
    index: usize,
    cond: &Condition,
    sched: &Schedule,
) -> Result<Latent> {
    let eps = pred.predict(z, sched.step_info(index), cond)?;
    if eps.shape() != z.shape() {
        return Err(Error::dims(z.shape(), eps.shape()));
    }
    Ok(eps)
}

/// Moves a latent from step `src` to step `dst` along the DDIM trajectory
/// implied by the noise estimate `eps`.
fn transfer(z: &Latent, eps: &Latent, ab_src: f64, ab_dst: f64) -> Latent {
    let scale = (ab_dst / ab_src).sqrt();
    let mix = (1.0 - ab_dst).sqrt() - (ab_dst * (1.0 - ab_src) / ab_src).sqrt();
    z.lin_comb(scale, eps, mix).expect("shapes checked by caller")
}

/// `z_t → z_{t−1}`.
pub fn ddim_step<P: NoisePredictor + ?Sized>(
    z_t: &Latent,
    t: usize,
    pred: &P,
    cond: &Condition,
    sched: &Schedule,
) -> Result<Latent> {
    sched.check_step(t)?;
    let eps = predict_checked(pred, z_t, t, cond, sched)?;
    Ok(transfer(z_t, &eps, sched.alpha_bar(t), sched.alpha_bar(t - 1)))
}

/// `z_{t−1} → z_t`, with ε̂ evaluated at `z_{t−1}` for step `t`.
pub fn ddim_invert_step<P: NoisePredictor + ?Sized>(
    z_prev: &Latent,
    t: usize,
    pred: &P,
    cond: &Condition,
    sched: &Schedule,
) -> Result<Latent> {
    sched.check_step(t)?;
    let eps = predict_checked(pred, z_prev, t, cond, sched)?;
    Ok(transfer(z_prev, &eps, sched.alpha_bar(t - 1), sched.alpha_bar(t)))
}

/// Denoises from step `from` down to step `to` (`from ≥ to`).
pub fn ddim_denoise<P: NoisePredictor + ?Sized>(
    z: &Latent,
    from: usize,
    to: usize,
    pred: &P,
    cond: &Condition,
    sched: &Schedule,
) -> Result<Latent> {
    if to > from {
        return Err(Error::invalid(format!("denoise window {from}→{to} runs backwards")));
    }
    let mut cur = z.clone();
    for t in (to + 1..=from).rev() {
        cur = ddim_step(&cur, t, pred, cond, sched)?;
    }
    Ok(cur)
}

/// Inverts from step `from` up to step `to` (`from ≤ to`).
pub fn ddim_invert<P: NoisePredictor + ?Sized>(
    z: &Latent,
    from: usize,
    to: usize,
    pred: &P,
    cond: &Condition,
    sched: &Schedule,
) -> Result<Latent> {
    if to < from {
        return Err(Error::invalid(format!("inversion window {from}→{to} runs backwards")));
    }
    let mut cur = z.clone();
    for t in from + 1..=to {
        cur = ddim_invert_step(&cur, t, pred, cond, sched)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{StepInfo, ToyDenoiser};
    use crate::tensor::Shape;

    struct Zero;

    impl NoisePredictor for Zero {
        fn predict(&self, latent: &Latent, _: StepInfo, _: &Condition) -> Result<Latent> {
            Ok(Latent::zeros(latent.shape()))
        }
    }

    struct Broken;

    impl NoisePredictor for Broken {
        fn predict(&self, _: &Latent, _: StepInfo, _: &Condition) -> Result<Latent> {
            Err(Error::invalid("backend offline"))
        }
    }

    fn shape() -> Shape {
        Shape::new(4, 16, 16)
    }

    #[test]
    fn zero_noise_step_is_pure_scaling() {
        let sched = Schedule::new(50, 0.4).unwrap();
        let z = Latent::gaussian(shape(), 3);
        let out = ddim_step(&z, 10, &Zero, &Condition::null(), &sched).unwrap();
        let ratio = (sched.alpha_bar(9) / sched.alpha_bar(10)).sqrt();
        assert!(out.max_abs_diff(&z.scaled(ratio)) < 1e-15);

        let inv = ddim_invert_step(&z, 10, &Zero, &Condition::null(), &sched).unwrap();
        assert!(inv.max_abs_diff(&z.scaled(1.0 / ratio)) < 1e-15);
    }

    #[test]
    fn full_denoise_is_deterministic() {
        let sched = Schedule::new(50, 1.0).unwrap();
        let toy = ToyDenoiser::default();
        let cond = Condition::prompt("a quiet harbor");
        let a = ddim_denoise(&Latent::gaussian(shape(), 9), 50, 0, &toy, &cond, &sched).unwrap();
        let b = ddim_denoise(&Latent::gaussian(shape(), 9), 50, 0, &toy, &cond, &sched).unwrap();
        assert_eq!(a, b);
        let inv_a = ddim_invert(&a, 0, 20, &toy, &cond, &sched).unwrap();
        let inv_b = ddim_invert(&b, 0, 20, &toy, &cond, &sched).unwrap();
        assert_eq!(inv_a, inv_b);
    }

    /// Under the toy denoiser with the null prompt every DDIM step multiplies
    /// each coordinate by one scalar, so the exact round-trip output is the
    /// product of per-step scalars applied to the input.
    fn oracle_gain(sched: &Schedule, window: usize, sigma0: f64) -> f64 {
        let s2 = sigma0 * sigma0;
        // μ = 0, so x̂₀ = k·z and ε̂ = (1 − √ᾱ·k)/√(1−ᾱ) · z.
        let eps_gain = |ab: f64| {
            let k = s2 * ab.sqrt() / (ab * s2 + 1.0 - ab);
            (1.0 - ab.sqrt() * k) / (1.0 - ab).sqrt()
        };
        let step = |ab_src: f64, ab_dst: f64, eg: f64| {
            (ab_dst / ab_src).sqrt()
                + ((1.0 - ab_dst).sqrt() - (ab_dst * (1.0 - ab_src) / ab_src).sqrt()) * eg
        };
        let mut g = 1.0;
        for t in 1..=window {
            let eg = eps_gain(sched.alpha_bar(t));
            g *= step(sched.alpha_bar(t - 1), sched.alpha_bar(t), eg);
        }
        for t in (1..=window).rev() {
            let eg = eps_gain(sched.alpha_bar(t));
            g *= step(sched.alpha_bar(t), sched.alpha_bar(t - 1), eg);
        }
        g
    }

    fn round_trip_error(steps: usize) -> (f64, f64, Latent, Latent) {
        let sched = Schedule::new(steps, 0.4).unwrap();
        let toy = ToyDenoiser::default();
        let z0 = Latent::gaussian(shape(), 21).scaled(0.5);
        let w = sched.window();
        let up = ddim_invert(&z0, 0, w, &toy, &Condition::null(), &sched).unwrap();
        let back = ddim_denoise(&up, w, 0, &toy, &Condition::null(), &sched).unwrap();
        let gain = oracle_gain(&sched, w, toy.sigma0());
        (back.relative_l2(&z0), gain, back, z0)
    }

    /// Relative error of the 20-step round trip at T = 50, from the
    /// standalone numpy oracle.
    const ORACLE_REL_ERR_T50: f64 = 0.026669641528433763;

    #[test]
    fn toy_round_trip_matches_affine_oracle() {
        let (rel, gain, back, z0) = round_trip_error(50);
        assert!(back.max_abs_diff(&z0.scaled(gain)) < 1e-12);
        assert!(((gain - 1.0).abs() - rel).abs() < 1e-9);
        assert!((rel - ORACLE_REL_ERR_T50).abs() < 1e-9, "{rel}");
    }

    #[test]
    fn round_trip_error_shrinks_with_more_steps() {
        let e10 = round_trip_error(10).0;
        let e20 = round_trip_error(20).0;
        let e50 = round_trip_error(50).0;
        assert!(e10 > e20 && e20 > e50, "{e10} {e20} {e50}");
    }

    #[test]
    fn backend_failures_propagate() {
        let sched = Schedule::new(10, 1.0).unwrap();
        let z = Latent::zeros(shape());
        assert!(ddim_step(&z, 3, &Broken, &Condition::null(), &sched).is_err());
        assert!(ddim_invert_step(&z, 3, &Broken, &Condition::null(), &sched).is_err());
        assert!(ddim_step(&z, 0, &Zero, &Condition::null(), &sched).is_err());
        assert!(ddim_step(&z, 11, &Zero, &Condition::null(), &sched).is_err());
    }
}
