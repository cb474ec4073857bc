//! Device-side gradient processing: Gaussian moment matching, mean
//! centering, one-bit compression and the optional B-bit quantizer for the
//! reported moments.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-device Gaussian prior on gradient entries, `g ~ N(mean, std^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientMoments {
    pub mean: f64,
    pub std: f64,
}

impl GradientMoments {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !std.is_finite() || std < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "moments must be finite with std >= 0 (mean {mean}, std {std})"
            )));
        }
        Ok(Self { mean, std })
    }
}

/// `sign(x)`, with `sign(0) = +1`.
#[inline]
pub fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// A vector over `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    /// Fails if any entry is not exactly -1 or +1.
    pub fn from_entries(entries: Vec<i8>) -> Result<Self> {
        if let Some(bad) = entries.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!(
                "sign entry {bad} is {} (must be -1 or +1)",
                entries[bad]
            )));
        }
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|&s| f64::from(s))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.iter().collect()
    }
}

impl std::ops::Neg for SignVector {
    type Output = SignVector;

    fn neg(self) -> SignVector {
        SignVector(self.0.into_iter().map(|s| -s).collect())
    }
}

fn check_finite(g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::EmptyGradient);
    }
    match g.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteGradient { index }),
        None => Ok(()),
    }
}

/// Sample mean and population standard deviation (divisor `M`).
pub fn estimate_moments(g: &[f64]) -> Result<GradientMoments> {
    check_finite(g)?;
    let m = g.len() as f64;
    let mean = g.iter().sum::<f64>() / m;
    let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    Ok(GradientMoments {
        mean,
        std: var.sqrt(),
    })
}

pub fn center_gradient(g: &[f64], moments: &GradientMoments) -> Vec<f64> {
    g.iter().map(|v| v - moments.mean).collect()
}

pub fn one_bit_quantize(gbar: &[f64]) -> SignVector {
    SignVector(gbar.iter().map(|&v| sign(v)).collect())
}

/// Moments, centered gradient signs, in one call.
pub fn compress(g: &[f64]) -> Result<(GradientMoments, SignVector)> {
    let moments = estimate_moments(g)?;
    let signs = one_bit_quantize(&center_gradient(g, &moments));
    Ok((moments, signs))
}

/// Uniform scalar quantizer with `2^bits` levels spanning `[lo, hi]`
/// (both endpoints are levels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarQuantizer {
    lo: f64,
    hi: f64,
    levels: u64,
}

impl ScalarQuantizer {
    pub fn new(bits: u32, lo: f64, hi: f64) -> Result<Self> {
        if bits == 0 || bits > 52 {
            return Err(Error::InvalidBits(bits));
        }
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidRange { lo, hi });
        }
        Ok(Self {
            lo,
            hi,
            levels: 1u64 << bits,
        })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.levels - 1) as f64
    }

    pub fn level(&self, index: u64) -> f64 {
        if index + 1 >= self.levels {
            self.hi
        } else {
            self.lo + index as f64 * self.step()
        }
    }

    pub fn quantize(&self, x: f64) -> f64 {
        let clamped = x.clamp(self.lo, self.hi);
        let index = ((clamped - self.lo) / self.step()).round() as u64;
        self.level(index.min(self.levels - 1))
    }
}

/// Quantizes both moments on the same `bits`-bit grid over `[lo, hi]`; the
/// reconstructed std is clamped at zero.
pub fn quantize_moments(
    moments: &GradientMoments,
    bits: u32,
    lo: f64,
    hi: f64,
) -> Result<GradientMoments> {
    let q = ScalarQuantizer::new(bits, lo, hi)?;
    Ok(GradientMoments {
        mean: q.quantize(moments.mean),
        std: q.quantize(moments.std).max(0.0),
    })
}

/// Quantizer for the moments a device reports, with ranges tied to a scale
/// estimate `s` shared by device and server: the mean over `[-4s, 4s]`, the
/// std over `[0, 4s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentQuantizer {
    pub bits: u32,
}

impl Default for MomentQuantizer {
    fn default() -> Self {
        Self { bits: 8 }
    }
}

impl MomentQuantizer {
    pub const RANGE_MULTIPLE: f64 = 4.0;

    pub fn quantize(&self, moments: &GradientMoments, scale: f64) -> Result<GradientMoments> {
        let half_width = Self::RANGE_MULTIPLE * scale;
        let mean_q = ScalarQuantizer::new(self.bits, -half_width, half_width)?;
        let std_q = ScalarQuantizer::new(self.bits, 0.0, half_width)?;
        Ok(GradientMoments {
            mean: mean_q.quantize(moments.mean),
            std: std_q.quantize(moments.std).max(0.0),
        })
    }
}
