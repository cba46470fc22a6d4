//! Calibrating an average-case bias magnitude from intermittent exposure.
//!
//! When the treatment is only intermittently active (a phone conversation
//! covers part of the hazard window), a pair whose hazard window overlaps
//! treatment with probability `rho` has average treatment probability
//! `p_bar = (1 - rho) * p_not_driving + rho * p_driving`, mixing the
//! probability that the exposure would land in the hazard window anyway.
//! The bias magnitude with that average is `gamma' = p_bar / (1 - p_bar)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default chance that, while actually driving, the exposure falls in the
/// hazard window rather than the control window.
pub const DEFAULT_P_DRIVING: f64 = 0.5;

/// Default chance for pairs not driving during the control window.
pub const DEFAULT_P_NOT_DRIVING: f64 = 1.0;

/// Intermittency mixture: `rho` is the share of pairs that were driving
/// during the control window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntermittencyCalibration {
    rho: f64,
    p_driving: f64,
    p_not_driving: f64,
}

fn unit_interval(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(v)
}

impl IntermittencyCalibration {
    pub fn new(rho: f64, p_driving: f64, p_not_driving: f64) -> Result<Self> {
        Ok(Self {
            rho: unit_interval("rho", rho)?,
            p_driving: unit_interval("p_driving", p_driving)?,
            p_not_driving: unit_interval("p_not_driving", p_not_driving)?,
        })
    }

    /// Calibration with the default window probabilities (1/2 and 1).
    pub fn from_rate(rho: f64) -> Result<Self> {
        Self::new(rho, DEFAULT_P_DRIVING, DEFAULT_P_NOT_DRIVING)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn p_driving(&self) -> f64 {
        self.p_driving
    }

    pub fn p_not_driving(&self) -> f64 {
        self.p_not_driving
    }

    /// Average treatment probability implied by the mixture.
    pub fn p_bar(&self) -> f64 {
        (1.0 - self.rho) * self.p_not_driving + self.rho * self.p_driving
    }
}

/// Average-case bias magnitude `p_bar / (1 - p_bar)` implied by the mixture.
pub fn gamma_prime_from_intermittency(cal: &IntermittencyCalibration) -> Result<f64> {
    let p_bar = cal.p_bar();
    if p_bar >= 1.0 {
        return Err(Error::UnboundedAverageBias);
    }
    Ok(p_bar / (1.0 - p_bar))
}
