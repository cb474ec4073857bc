//! Server-side estimators of the average gradient from the superposed,
//! sign-aligned reception `y_m = sum_k |h_k| sign(gbar_{k,m}) + n_m`.
//!
//! [`BayAirComp`] is the closed-form MMSE estimator under Gaussian priors
//! `g_{k,m} ~ N(mu_k, nu_k^2)`:
//!
//! ```text
//! f(y) = (1/K) sum_k [ mu_k + sqrt(2/pi) nu_k A_k(y) ]
//! A_k(y) = ( sum_{b: b_k=+1} w(b) - sum_{b: b_k=-1} w(b) ) / sum_b w(b)
//! w(b) = exp(-(y - h.b)^2 / (2 sigma^2)),   b in {-1, +1}^K
//! ```
//!
//! [`mmse_oracle`] evaluates the same posterior mean by brute-force
//! quadrature of the defining integrals and is used to validate it.

use serde::{Deserialize, Serialize};

use crate::gradient_model::{sign, GradientMoments, SignVector};
use crate::quadrature::{half_range_hermite, scale_half_rule};
use crate::{Error, Result, SQRT_2_OVER_PI};

/// Largest device count for the `2^K` pattern enumeration.
pub const K_MAX: usize = 20;

/// Largest device count accepted by the quadrature oracle.
pub const ORACLE_K_MAX: usize = 3;

pub const DEFAULT_QUADRATURE_ORDER: usize = 64;

/// Everything the server knows about one resource block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationContext {
    pub channel_magnitudes: Vec<f64>,
    pub moments: Vec<GradientMoments>,
    pub noise_variance: f64,
}

impl AggregationContext {
    pub fn new(
        channel_magnitudes: Vec<f64>,
        moments: Vec<GradientMoments>,
        noise_variance: f64,
    ) -> Result<Self> {
        let ctx = Self {
            channel_magnitudes,
            moments,
            noise_variance,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Identical devices: `|h_k| = h`, `mu_k = mu`, `nu_k = nu`.
    pub fn homogeneous(k: usize, h: f64, mu: f64, nu: f64, noise_variance: f64) -> Result<Self> {
        Self::new(
            vec![h; k],
            vec![GradientMoments { mean: mu, std: nu }; k],
            noise_variance,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::InvalidContext("no devices".into()));
        }
        if self.moments.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                found: self.moments.len(),
            });
        }
        if self
            .channel_magnitudes
            .iter()
            .any(|h| !(h.is_finite() && *h >= 0.0))
        {
            return Err(Error::InvalidContext(
                "channel magnitudes must be finite and >= 0".into(),
            ));
        }
        if self
            .moments
            .iter()
            .any(|m| !(m.mean.is_finite() && m.std.is_finite() && m.std >= 0.0))
        {
            return Err(Error::InvalidContext(
                "moments must be finite with std >= 0".into(),
            ));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidContext(format!(
                "noise variance must be positive (got {})",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.channel_magnitudes.len()
    }

    /// `(1/K) sum_k mu_k`.
    pub fn prior_mean(&self) -> f64 {
        self.moments.iter().map(|m| m.mean).sum::<f64>() / self.k() as f64
    }

    /// `(1/K) sum_k nu_k`.
    pub fn mean_std(&self) -> f64 {
        self.moments.iter().map(|m| m.std).sum::<f64>() / self.k() as f64
    }
}

/// The closed-form estimator with the pattern sums `h.b` precomputed for a
/// context. Pattern `mask` has `b_k = +1` iff bit `k` of `mask` is set.
#[derive(Debug, Clone)]
pub struct BayAirComp {
    ctx: AggregationContext,
    pattern_sums: Vec<f64>,
}

impl BayAirComp {
    pub fn new(ctx: AggregationContext) -> Result<Self> {
        ctx.validate()?;
        let k = ctx.k();
        if k > K_MAX {
            return Err(Error::EnumerationBound { k, max: K_MAX });
        }
        let pattern_sums = (0..1usize << k)
            .map(|mask| {
                ctx.channel_magnitudes
                    .iter()
                    .enumerate()
                    .map(|(j, h)| if mask >> j & 1 == 1 { *h } else { -h })
                    .sum()
            })
            .collect();
        Ok(Self { ctx, pattern_sums })
    }

    pub fn context(&self) -> &AggregationContext {
        &self.ctx
    }

    /// `A_k(y)` for every device, each in `(-1, 1)`.
    pub fn a_terms(&self, y: f64) -> Vec<f64> {
        let k = self.ctx.k();
        let scale = 1.0 / (2.0 * self.ctx.noise_variance);
        let log_w = |s: f64| -(y - s) * (y - s) * scale;
        let max = self
            .pattern_sums
            .iter()
            .map(|&s| log_w(s))
            .fold(f64::NEG_INFINITY, f64::max);

        let mut denom = 0.0;
        let mut signed = vec![0.0; k];
        for (mask, &s) in self.pattern_sums.iter().enumerate() {
            let w = (log_w(s) - max).exp();
            denom += w;
            for (j, acc) in signed.iter_mut().enumerate() {
                if mask >> j & 1 == 1 {
                    *acc += w;
                } else {
                    *acc -= w;
                }
            }
        }
        // denom >= 1: the maximizing pattern contributes exp(0).
        signed.iter_mut().for_each(|a| *a /= denom);
        signed
    }

    pub fn estimate(&self, y: f64) -> f64 {
        let k = self.ctx.k() as f64;
        self.a_terms(y)
            .iter()
            .zip(&self.ctx.moments)
            .map(|(a, m)| m.mean + SQRT_2_OVER_PI * m.std * a)
            .sum::<f64>()
            / k
    }

    /// Coordinate-wise estimate of the average gradient.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.estimate(v)).collect()
    }
}

pub fn a_term(y: f64, ctx: &AggregationContext, k: usize) -> Result<f64> {
    if k >= ctx.k() {
        return Err(Error::DeviceIndex {
            index: k,
            k: ctx.k(),
        });
    }
    Ok(BayAirComp::new(ctx.clone())?.a_terms(y)[k])
}

/// MMSE estimate of `(1/K) sum_k g_k` from one received coordinate.
pub fn bayaircomp(y: f64, ctx: &AggregationContext) -> Result<f64> {
    Ok(BayAirComp::new(ctx.clone())?.estimate(y))
}

/// Sign of each received coordinate (`sign(0) = +1`).
pub fn majority_vote(y: &[f64]) -> SignVector {
    SignVector::from_entries(y.iter().map(|&v| sign(v)).collect()).expect("sign() only yields +-1")
}

/// Majority vote rescaled to the prior: `mean(mu) + sqrt(2/pi) mean(nu) sign(y)`.
pub fn scaled_majority(y: f64, ctx: &AggregationContext) -> f64 {
    ctx.prior_mean() + SQRT_2_OVER_PI * ctx.mean_std() * f64::from(sign(y))
}

/// Linear rescaling baseline `y / sum_k |h_k| + mean(mu)`.
pub fn naive_mean(y: f64, ctx: &AggregationContext) -> Result<f64> {
    let total: f64 = ctx.channel_magnitudes.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(y / total + ctx.prior_mean())
}

/// Posterior mean by direct `K`-dimensional quadrature of
///
/// ```text
/// E[gbar_k | y] = int gbar_k P(y|gbar) P(gbar) dgbar / int P(y|gbar) P(gbar) dgbar
/// ```
///
/// over the independent Gaussian priors, with the one-bit likelihood
/// `P(y|gbar) ∝ exp(-(y - sum_k |h_k| sign(gbar_k))^2 / (2 sigma^2))`.
/// `order` nodes per dimension (half on each side of zero).
pub fn mmse_oracle(y: f64, ctx: &AggregationContext, order: usize) -> Result<f64> {
    ctx.validate()?;
    let k = ctx.k();
    if k > ORACLE_K_MAX {
        return Err(Error::OracleTooLarge {
            k,
            max: ORACLE_K_MAX,
        });
    }
    if order < 32 || !order.is_multiple_of(2) {
        return Err(Error::QuadratureOrder(order));
    }
    let half = half_range_hermite(order / 2);
    let rules: Vec<_> = ctx
        .moments
        .iter()
        .map(|m| scale_half_rule(&half, m.std))
        .collect();
    let points = order.pow(k as u32);

    let log_lik = |idx: &[usize]| -> f64 {
        let mean: f64 = idx
            .iter()
            .zip(&rules)
            .zip(&ctx.channel_magnitudes)
            .map(|((&i, rule), h)| h * f64::from(rule[i].side))
            .sum();
        -(y - mean).powi(2) / (2.0 * ctx.noise_variance)
    };
    let advance = |idx: &mut [usize]| {
        for d in idx.iter_mut() {
            *d += 1;
            if *d < order {
                return;
            }
            *d = 0;
        }
    };

    let mut idx = vec![0usize; k];
    let mut max = f64::NEG_INFINITY;
    for _ in 0..points {
        max = max.max(log_lik(&idx));
        advance(&mut idx);
    }

    let mut denom = 0.0;
    let mut numer = vec![0.0; k];
    idx.iter_mut().for_each(|d| *d = 0);
    for _ in 0..points {
        let weight: f64 = idx.iter().zip(&rules).map(|(&i, r)| r[i].weight).product();
        let w = weight * (log_lik(&idx) - max).exp();
        denom += w;
        for ((acc, &i), rule) in numer.iter_mut().zip(idx.iter()).zip(&rules) {
            *acc += w * rule[i].value;
        }
        advance(&mut idx);
    }
    let posterior: f64 = numer.iter().map(|n| n / denom).sum();
    Ok(ctx.prior_mean() + posterior / k as f64)
}

/// Server-side aggregation rule used by the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    BayAirComp,
    /// Plain signs of the reception, as in one-bit digital aggregation.
    MajorityVote,
    NaiveMean,
}

impl Aggregator {
    /// Estimate for every coordinate of one block reception.
    pub fn aggregate(&self, y: &[f64], ctx: &AggregationContext) -> Result<Vec<f64>> {
        match self {
            Aggregator::BayAirComp => Ok(BayAirComp::new(ctx.clone())?.apply(y)),
            Aggregator::MajorityVote => Ok(majority_vote(y).to_f64()),
            Aggregator::NaiveMean => y.iter().map(|&v| naive_mean(v, ctx)).collect(),
        }
    }
}

/// One row of an aggregation-function curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub y: f64,
    pub bayaircomp: f64,
    pub majority: f64,
    pub naive: f64,
}

/// Aggregation functions over a grid of received values.
pub fn curve(ctx: &AggregationContext, grid: &[f64]) -> Result<Vec<CurvePoint>> {
    let bay = BayAirComp::new(ctx.clone())?;
    grid.iter()
        .map(|&y| {
            Ok(CurvePoint {
                y,
                bayaircomp: bay.estimate(y),
                majority: scaled_majority(y, ctx),
                naive: naive_mean(y, ctx)?,
            })
        })
        .collect()
}

/// `n` evenly spaced points over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
