// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! EDICT coupled sampling.
//!
//! One denoising step `t → t−1` with `a = √(ᾱ_{t−1}/ᾱ_t)` and
//! `b = √(1−ᾱ_{t−1}) − √(ᾱ_{t−1}(1−ᾱ_t)/ᾱ_t)`:
//!
//! ```text
//! x ← a·x + b·ε̂(y, t)
//! y ← a·y + b·ε̂(x, t)        (uses the updated x)
//! x ← p·x + (1−p)·y
//! y ← p·y + (1−p)·x          (uses the mixed x)
//! ```
//!
//! Every line is invertible on its own, so running the lines backwards in
//! reverse order recovers the previous pair up to rounding.

use crate::error::{Error, Result};
use crate::tensor::Latent;

use super::{Condition, NoisePredictor, Schedule};

/// The EDICT latent pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupled {
    pub x: Latent,
    pub y: Latent,
}

impl Coupled {
    /// Both tracks start from the same latent.
    pub fn twin(z: Latent) -> Self {
        Coupled { x: z.clone(), y: z }
    }

    pub fn max_abs_diff(&self, other: &Coupled) -> f64 {
        self.x.max_abs_diff(&other.x).max(self.y.max_abs_diff(&other.y))
    }
}

fn check_mix(p: f64) -> Result<()> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::invalid(format!("EDICT mixing {p} outside (0.5, 1]")));
    }
    Ok(())
}

fn coefficients(sched: &Schedule, t: usize) -> (f64, f64) {
    let (ab_t, ab_prev) = (sched.alpha_bar(t), sched.alpha_bar(t - 1));
    let a = (ab_prev / ab_t).sqrt();
    let b = (1.0 - ab_prev).sqrt() - (ab_prev * (1.0 - ab_t) / ab_t).sqrt();
    (a, b)
}

fn eps<P: NoisePredictor + ?Sized>(
    pred: &P,
    z: &Latent,
    t: usize,
    cond: &Condition,
    sched: &Schedule,
) -> Result<Latent> {
    let e = pred.predict(z, sched.step_info(t), cond)?;
    if e.shape() != z.shape() {
        return Err(Error::dims(z.shape(), e.shape()));
    }
    Ok(e)
}

fn denoise_step<P: NoisePredictor + ?Sized>(
    pair: Coupled,
    t: usize,
    pred: &P,
    cond: &Condition,
    sched: &Schedule,
    p: f64,
) -> Result<Coupled> {
    let (a, b) = coefficients(sched, t);
    let x = pair.x.lin_comb(a, &eps(pred, &pair.y, t, cond, sched)?, b)?;
    let y = pair.y.lin_comb(a, &eps(pred, &x, t, cond, sched)?, b)?;
    let x = x.lin_comb(p, &y, 1.0 - p)?;
    let y = y.lin_comb(p, &x, 1.0 - p)?;
    Ok(Coupled { x, y })
}

fn invert_step<P: NoisePredictor + ?Sized>(
    pair: Coupled,
    t: usize,
    pred: &P,
    cond: &Condition,
    sched: &Schedule,
    p: f64,
) -> Result<Coupled> {
    let (a, b) = coefficients(sched, t);
    let Coupled { x, y } = pair;
    let y = y.lin_comb(1.0 / p, &x, -(1.0 - p) / p)?;
    let x = x.lin_comb(1.0 / p, &y, -(1.0 - p) / p)?;
    let y = y.lin_comb(1.0 / a, &eps(pred, &x, t, cond, sched)?, -b / a)?;
    let x = x.lin_comb(1.0 / a, &eps(pred, &y, t, cond, sched)?, -b / a)?;
    Ok(Coupled { x, y })
}

fn check_pair(pair: &Coupled) -> Result<()> {
    if pair.x.shape() != pair.y.shape() {
        return Err(Error::dims(pair.x.shape(), pair.y.shape()));
    }
    Ok(())
}

/// Denoises the pair from step `from` down to step `to`.
pub fn edict_denoise<P: NoisePredictor + ?Sized>(
    pair: Coupled,
    from: usize,
    to: usize,
    pred: &P,
    cond: &Condition,
    sched: &Schedule,
    p: f64,
) -> Result<Coupled> {
    check_mix(p)?;
    check_pair(&pair)?;
    if to > from || from > sched.steps() {
        return Err(Error::invalid(format!("denoise window {from}→{to} invalid")));
    }
    let mut cur = pair;
    for t in (to + 1..=from).rev() {
        cur = denoise_step(cur, t, pred, cond, sched, p)?;
    }
    Ok(cur)
}

/// Exact inverse of [`edict_denoise`]: walks from step `from` up to step `to`.
pub fn edict_invert<P: NoisePredictor + ?Sized>(
    pair: Coupled,
    from: usize,
    to: usize,
    pred: &P,
    cond: &Condition,
    sched: &Schedule,
    p: f64,
) -> Result<Coupled> {
    check_mix(p)?;
    check_pair(&pair)?;
    if to < from || to > sched.steps() {
        return Err(Error::invalid(format!("inversion window {from}→{to} invalid")));
    }
    let mut cur = pair;
    for t in from + 1..=to {
        cur = invert_step(cur, t, pred, cond, sched, p)?;
    }
    Ok(cur)
}
