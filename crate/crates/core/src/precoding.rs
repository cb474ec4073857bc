//! Transmit precoders `x_k = v_k * sign(gbar_k)`.

use serde::{Deserialize, Serialize};

use crate::gradient_model::{sign, SignVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderKind {
    /// One-bit CSIT: `v = sign(h)`.
    SignAlign,
    /// Full CSIT: invert the channel down to a common received amplitude,
    /// silence devices in deep fade.
    TruncatedInversion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecoderSpec {
    pub kind: PrecoderKind,
    pub power_limit: f64,
    pub truncation_threshold: f64,
}

impl Default for PrecoderSpec {
    fn default() -> Self {
        Self::sign_align()
    }
}

impl PrecoderSpec {
    pub const DEFAULT_THRESHOLD: f64 = 0.2;

    pub fn sign_align() -> Self {
        Self {
            kind: PrecoderKind::SignAlign,
            power_limit: 1.0,
            truncation_threshold: Self::DEFAULT_THRESHOLD,
        }
    }

    pub fn truncated_inversion(power_limit: f64, truncation_threshold: f64) -> Self {
        Self {
            kind: PrecoderKind::TruncatedInversion,
            power_limit,
            truncation_threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power_limit > 0.0 && self.power_limit.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "power limit must be positive (got {})",
                self.power_limit
            )));
        }
        if !(self.truncation_threshold >= 0.0 && self.truncation_threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "truncation threshold must be >= 0 (got {})",
                self.truncation_threshold
            )));
        }
        if self.kind == PrecoderKind::SignAlign && self.power_limit < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "sign alignment transmits unit power and needs P >= 1 (got {})",
                self.power_limit
            )));
        }
        Ok(())
    }

    /// Precoding coefficient `v` for channel `h`.
    pub fn coefficient(&self, h: f64) -> f64 {
        match self.kind {
            PrecoderKind::SignAlign => f64::from(sign(h)),
            PrecoderKind::TruncatedInversion => {
                if h.abs() >= self.truncation_threshold && h != 0.0 {
                    self.power_limit.sqrt() * self.truncation_threshold / h
                } else {
                    0.0
                }
            }
        }
    }

    /// Amplitude `h * v` with which this device arrives at the server.
    /// Nonnegative for both precoders.
    pub fn effective_gain(&self, h: f64) -> f64 {
        // abs() only normalizes the -0.0 of a truncated negative channel
        (h * self.coefficient(h)).abs()
    }

    pub fn precode(&self, h: f64, signs: &SignVector) -> Vec<f64> {
        let v = self.coefficient(h);
        signs.iter().map(|s| v * s).collect()
    }
}

/// `x = sign(h) * signs`, so that `h * x = |h| * signs`.
pub fn sign_align(h: f64, signs: &SignVector) -> Vec<f64> {
    PrecoderSpec::sign_align().precode(h, signs)
}

/// Channel inversion to the common received amplitude
/// `sqrt(P) * threshold`; zero block when `|h| < threshold`.
pub fn truncated_inversion(h: f64, signs: &SignVector, spec: &PrecoderSpec) -> Result<Vec<f64>> {
    if spec.kind != PrecoderKind::TruncatedInversion {
        return Err(Error::InvalidArgument(
            "truncated_inversion needs a TruncatedInversion spec".into(),
        ));
    }
    Ok(spec.precode(h, signs))
}

/// Per-symbol surrogate of the average power constraint.
pub fn check_power(block: &[f64], power_limit: f64) -> bool {
    block.iter().all(|x| x * x <= power_limit + 1e-12)
}
