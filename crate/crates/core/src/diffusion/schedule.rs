// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

use super::StepInfo;

/// Length of the training schedule the sampling schedule is drawn from.
pub const TRAIN_STEPS: usize = 1000;
const BETA_START: f64 = 0.00085;
const BETA_END: f64 = 0.012;

/// Scaled-linear schedule (√β linear in [√0.00085, √0.012] over 1000 steps)
/// subsampled to `T` sampling steps with trailing spacing: step `k ≥ 1` maps
/// to training timestep `round(k·1000/T) − 1`, step 0 is the clean sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    alpha_bar: Vec<f64>,
    timesteps: Vec<usize>,
    xi: f64,
}

impl Schedule {
    pub fn new(steps: usize, xi: f64) -> Result<Schedule> {
        if steps == 0 || steps > TRAIN_STEPS {
            return Err(Error::invalid(format!(
                "step count {steps} outside 1..={TRAIN_STEPS}"
            )));
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::invalid(format!("partial-run fraction {xi} outside (0, 1]")));
        }
        let (lo, hi) = (BETA_START.sqrt(), BETA_END.sqrt());
        let mut cumulative = Vec::with_capacity(TRAIN_STEPS);
        let mut prod = 1.0;
        for i in 0..TRAIN_STEPS {
            let root = lo + (hi - lo) * i as f64 / (TRAIN_STEPS - 1) as f64;
            prod *= 1.0 - root * root;
            cumulative.push(prod);
        }
        let mut alpha_bar = vec![1.0];
        let mut timesteps = vec![0];
        for k in 1..=steps {
            let t = ((k * TRAIN_STEPS) as f64 / steps as f64).round() as usize - 1;
            alpha_bar.push(cumulative[t]);
            timesteps.push(t);
        }
        Ok(Schedule {
            alpha_bar,
            timesteps,
            xi,
        })
    }

    /// Sampling step count `T`.
    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Same schedule, different partial-run fraction.
    pub fn with_xi(&self, xi: f64) -> Result<Schedule> {
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::invalid(format!("partial-run fraction {xi} outside (0, 1]")));
        }
        Ok(Schedule { xi, ..self.clone() })
    }

    /// Last step of the active window, `⌊ξ·T⌋`.
    pub fn window(&self) -> usize {
        self.window_for(self.xi)
    }

    pub fn window_for(&self, xi: f64) -> usize {
        ((xi * self.steps() as f64).floor() as usize).min(self.steps())
    }

    pub fn alpha_bar(&self, index: usize) -> f64 {
        self.alpha_bar[index]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn step_info(&self, index: usize) -> StepInfo {
        StepInfo {
            index,
            timestep: self.timesteps[index],
            alpha_bar: self.alpha_bar[index],
        }
    }

    pub(crate) fn check_step(&self, index: usize) -> Result<()> {
        if index == 0 || index > self.steps() {
            return Err(Error::invalid(format!(
                "step {index} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }
}
