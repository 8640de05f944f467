//! Trial size and length for an optimal design.
//!
//! An optimal design estimates `τ` with variance `σ²/m`, so a two-sided
//! size-`α` z-test detecting `τ0` with the requested power needs
//! `(τ0/σ)·√m ≥ z_{1−α/2} + z_{power}`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanInputs {
    /// Semi-difference to detect (the H-vs-A difference is `2·tau0`).
    pub tau0: f64,
    /// Planning residual standard deviation.
    pub sigma: f64,
    /// Two-sided size.
    pub alpha: f64,
    pub power: f64,
    pub n3: usize,
    pub n2: usize,
}

impl PlanInputs {
    pub fn validate(&self) -> Result<()> {
        if self.tau0 == 0.0 {
            return Err(Error::UndetectableDifference);
        }
        let checks = [
            (self.tau0.is_finite() && self.tau0 > 0.0, "tau0 must be > 0"),
            (
                self.sigma.is_finite() && self.sigma > 0.0,
                "sigma must be > 0",
            ),
            (
                self.alpha > 0.0 && self.alpha < 1.0,
                "alpha must lie in (0, 1)",
            ),
            (
                self.power > 0.0 && self.power < 1.0,
                "power must lie in (0, 1)",
            ),
            (self.n3 + self.n2 >= 1, "need at least one patient"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidInput((*msg).to_string())),
            None => Ok(()),
        }
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `m = ⌈((z_{1−α/2} + z_power)·σ/τ0)²⌉`.
pub fn required_observations(inputs: &PlanInputs) -> Result<usize> {
    inputs.validate()?;
    let z = normal_quantile(1.0 - inputs.alpha / 2.0) + normal_quantile(inputs.power);
    let m = (z * inputs.sigma / inputs.tau0).powi(2);
    Ok(m.ceil() as usize)
}

/// `w = ⌈m / (3N3 + 2N2)⌉`, optionally rounded up to even.
pub fn required_weeks(m: usize, n3: usize, n2: usize, round_even: bool) -> Result<usize> {
    let per_week = 3 * n3 + 2 * n2;
    if per_week == 0 {
        return Err(Error::InvalidInput("need at least one patient".into()));
    }
    let w = m.div_ceil(per_week);
    Ok(if round_even && w % 2 == 1 { w + 1 } else { w })
}

/// `σ²/(w(3N3 + 2N2))`, the variance of the estimator under an optimal design.
pub fn estimator_variance(weeks: usize, n3: usize, n2: usize, sigma: f64) -> f64 {
    sigma * sigma / (weeks * (3 * n3 + 2 * n2)) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialPlan {
    pub inputs: PlanInputs,
    pub z_alpha: f64,
    pub z_power: f64,
    pub observations: usize,
    pub weeks: usize,
    pub observations_delivered: usize,
    pub variance: f64,
}

/// Full planning pass: `m`, then `w`, then the variance the chosen `w` delivers.
pub fn plan_trial(inputs: &PlanInputs, round_even: bool) -> Result<TrialPlan> {
    let observations = required_observations(inputs)?;
    let weeks = required_weeks(observations, inputs.n3, inputs.n2, round_even)?;
    Ok(TrialPlan {
        inputs: *inputs,
        z_alpha: normal_quantile(1.0 - inputs.alpha / 2.0),
        z_power: normal_quantile(inputs.power),
        observations,
        weeks,
        observations_delivered: weeks * (3 * inputs.n3 + 2 * inputs.n2),
        variance: estimator_variance(weeks, inputs.n3, inputs.n2, inputs.sigma),
    })
}
