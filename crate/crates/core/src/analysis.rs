//! Analytical performance quantities and their Monte-Carlo counterparts:
//! the aggregation MSE bound, the limits of `E[g_true^T e]` at vanishing and
//! infinite SNR, and the convergence envelope under `gamma / (t + 1)` steps.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::aggregation::{naive_mean, scaled_majority, AggregationContext, BayAirComp};
use crate::channel::FADING_VARIANCE;
use crate::fedtrain::Dataset;
use crate::gradient_model::sign;
use crate::{Error, Result};

const TWO_OVER_PI: f64 = std::f64::consts::FRAC_2_PI;

/// `sigma_MSE^2 = (M / K^2) (1 + 2/pi) sum_k nu_k^2`.
pub fn mse_bound(m: usize, k: usize, nus: &[f64]) -> f64 {
    let sum_sq: f64 = nus.iter().map(|v| v * v).sum();
    m as f64 / (k * k) as f64 * (1.0 + TWO_OVER_PI) * sum_sq
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        }
    }

    /// `|mean - target|` in standard errors (0 when both coincide exactly).
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

/// Empirical check of an analytic upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub analytic: f64,
    pub empirical: f64,
    pub samples: usize,
    pub standard_error: f64,
    /// `empirical <= analytic + 2 * standard_error`.
    pub satisfied: bool,
}

impl BoundReport {
    pub fn new(analytic: f64, estimate: MonteCarloEstimate) -> Self {
        Self {
            analytic,
            empirical: estimate.mean,
            samples: estimate.samples,
            standard_error: estimate.std_error,
            satisfied: estimate.mean <= analytic + 2.0 * estimate.std_error,
        }
    }

    /// Distance below the bound, in standard errors.
    pub fn margin_sigmas(&self) -> f64 {
        if self.standard_error == 0.0 {
            if self.empirical <= self.analytic {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        } else {
            (self.analytic - self.empirical) / self.standard_error
        }
    }
}

/// One simulated coordinate: draws `g_k ~ N(mu_k, nu_k^2)`, transmits
/// `sign(g_k - mu_k)` over the sign-aligned channel and returns
/// `(y, (1/K) sum_k g_k)`.
fn draw_coordinate<R: Rng + ?Sized>(
    ctx: &AggregationContext,
    noise: &Normal<f64>,
    rng: &mut R,
) -> (f64, f64) {
    let mut y = 0.0;
    let mut avg = 0.0;
    for (h, m) in ctx.channel_magnitudes.iter().zip(&ctx.moments) {
        let z: f64 = StandardNormal.sample(rng);
        let centered = m.std * z;
        avg += m.mean + centered;
        y += h * f64::from(sign(centered));
    }
    y += noise.sample(rng);
    (y, avg / ctx.k() as f64)
}

fn noise_for(variance: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, variance.sqrt())
        .map_err(|e| Error::InvalidArgument(format!("noise variance {variance}: {e}")))
}

/// Monte-Carlo `E||f_BayAirComp(y) - (1/K) sum_k g_k||^2` over `trials`
/// gradient vectors of length `m`, compared against [`mse_bound`].
pub fn empirical_mse<R: Rng + ?Sized>(
    ctx: &AggregationContext,
    m: usize,
    trials: usize,
    rng: &mut R,
) -> Result<BoundReport> {
    if trials < 2 || m == 0 {
        return Err(Error::InvalidArgument(
            "need at least two trials and one coordinate".into(),
        ));
    }
    let bay = BayAirComp::new(ctx.clone())?;
    let noise = noise_for(ctx.noise_variance)?;
    let per_trial: Vec<f64> = (0..trials)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let (y, target) = draw_coordinate(ctx, &noise, rng);
                    (bay.estimate(y) - target).powi(2)
                })
                .sum()
        })
        .collect();
    let nus: Vec<f64> = ctx.moments.iter().map(|mo| mo.std).collect();
    Ok(BoundReport::new(
        mse_bound(m, ctx.k(), &nus),
        MonteCarloEstimate::from_samples(&per_trial),
    ))
}

/// How channel magnitudes are chosen per trial in [`compare_estimators`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelDraw {
    /// The context's magnitudes in every trial.
    Fixed,
    /// Fresh `|h_k|`, `h_k ~ N(0, 1/2)`, every trial.
    Rayleigh,
}

/// Per-coordinate MSE of the three estimators on identical draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorComparison {
    pub bayaircomp: MonteCarloEstimate,
    pub naive_mean: MonteCarloEstimate,
    pub scaled_majority: MonteCarloEstimate,
    /// Mean paired difference `naive - bayaircomp`.
    pub naive_excess: MonteCarloEstimate,
    /// Mean paired difference `majority - bayaircomp`.
    pub majority_excess: MonteCarloEstimate,
}

impl EstimatorComparison {
    /// `1 - mse(BayAirComp) / mse(naive)`.
    pub fn naive_margin(&self) -> f64 {
        1.0 - self.bayaircomp.mean / self.naive_mean.mean
    }

    /// `1 - mse(BayAirComp) / mse(scaled majority)`.
    pub fn majority_margin(&self) -> f64 {
        1.0 - self.bayaircomp.mean / self.scaled_majority.mean
    }
}

/// Paired Monte-Carlo comparison of BayAirComp against the linear and
/// rescaled majority-vote baselines, one coordinate per trial.
pub fn compare_estimators<R: Rng + ?Sized>(
    ctx: &AggregationContext,
    channel: ChannelDraw,
    trials: usize,
    rng: &mut R,
) -> Result<EstimatorComparison> {
    if trials < 2 {
        return Err(Error::InvalidArgument("need at least two trials".into()));
    }
    let noise = noise_for(ctx.noise_variance)?;
    let fading = Normal::new(0.0, FADING_VARIANCE.sqrt()).expect("valid normal");
    let fixed = BayAirComp::new(ctx.clone())?;
    let mut bay_err = Vec::with_capacity(trials);
    let mut naive_err = Vec::with_capacity(trials);
    let mut major_err = Vec::with_capacity(trials);
    for _ in 0..trials {
        let drawn;
        let (bay, trial_ctx) = match channel {
            ChannelDraw::Fixed => (&fixed, ctx),
            ChannelDraw::Rayleigh => {
                let mut c = ctx.clone();
                c.channel_magnitudes
                    .iter_mut()
                    .for_each(|h| *h = fading.sample(rng).abs());
                drawn = BayAirComp::new(c)?;
                (&drawn, drawn.context())
            }
        };
        let (y, target) = draw_coordinate(trial_ctx, &noise, rng);
        bay_err.push((bay.estimate(y) - target).powi(2));
        naive_err.push((naive_mean(y, trial_ctx)? - target).powi(2));
        major_err.push((scaled_majority(y, trial_ctx) - target).powi(2));
    }
    let diff = |a: &[f64]| -> Vec<f64> { a.iter().zip(&bay_err).map(|(x, b)| x - b).collect() };
    Ok(EstimatorComparison {
        bayaircomp: MonteCarloEstimate::from_samples(&bay_err),
        naive_mean: MonteCarloEstimate::from_samples(&naive_err),
        scaled_majority: MonteCarloEstimate::from_samples(&major_err),
        naive_excess: MonteCarloEstimate::from_samples(&diff(&naive_err)),
        majority_excess: MonteCarloEstimate::from_samples(&diff(&major_err)),
    })
}

/// `(nu_true)^2 = (1/K^2) sum_k nu_k^2`.
pub fn nu_true_sq(ctx: &AggregationContext) -> f64 {
    let k = ctx.k() as f64;
    ctx.moments.iter().map(|m| m.std * m.std).sum::<f64>() / (k * k)
}

/// Analytic values of `E[g_true^T e]` as SNR goes to 0 and to infinity:
/// `M nu_true^2` and `M (1 - 2/pi) nu_true^2`.
pub fn inner_product_limits(m: usize, ctx: &AggregationContext) -> (f64, f64) {
    let base = m as f64 * nu_true_sq(ctx);
    (base, base * (1.0 - TWO_OVER_PI))
}

/// Monte-Carlo `E[g_true^T e]` with `e = g_true - f_BayAirComp(y)`.
///
/// `noise_variance` overrides the context's noise variance for both the
/// channel and the estimator. The high-SNR limit assumes every sign pattern
/// yields a distinct `h.b`, which fails for equal magnitudes.
pub fn grad_error_inner_product<R: Rng + ?Sized>(
    ctx: &AggregationContext,
    m: usize,
    trials: usize,
    noise_variance: Option<f64>,
    rng: &mut R,
) -> Result<MonteCarloEstimate> {
    if trials < 2 || m == 0 {
        return Err(Error::InvalidArgument(
            "need at least two trials and one coordinate".into(),
        ));
    }
    let mut ctx = ctx.clone();
    if let Some(v) = noise_variance {
        ctx.noise_variance = v;
    }
    let bay = BayAirComp::new(ctx.clone())?;
    let noise = noise_for(ctx.noise_variance)?;
    let per_trial: Vec<f64> = (0..trials)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let (y, g_true) = draw_coordinate(&ctx, &noise, rng);
                    g_true * (g_true - bay.estimate(y))
                })
                .sum()
        })
        .collect();
    Ok(MonteCarloEstimate::from_samples(&per_trial))
}

/// Right-hand side of the convergence-rate bound for `gamma_t = gamma/(t+1)`:
///
/// ```text
/// (1/sqrt(T)) [ gap / (gamma (1 - L gamma/2)) + sigma_MSE^2 (1 + ln T) (L gamma/2) / (1 - L gamma/2) ]
/// ```
pub fn convergence_bound(
    rounds: usize,
    gamma: f64,
    smoothness: f64,
    sigma_mse_sq: f64,
    loss_gap: f64,
) -> Result<f64> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    let half = smoothness * gamma / 2.0;
    if !(half > 0.0 && half < 1.0) {
        return Err(Error::SmoothnessViolated(smoothness * gamma));
    }
    let t = rounds as f64;
    let slack = 1.0 - half;
    Ok((loss_gap / (gamma * slack) + sigma_mse_sq * (1.0 + t.ln()) * half / slack) / t.sqrt())
}

/// Smoothness constant of the mean squared loss: the largest eigenvalue of
/// `(1/N) sum_i x_i x_i^T`.
pub fn linear_regression_smoothness(data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = data.feature_dim;
    let mut second = DMatrix::<f64>::zeros(d, d);
    for e in &data.examples {
        for i in 0..d {
            for j in 0..d {
                second[(i, j)] += e.features[i] * e.features[j];
            }
        }
    }
    second /= data.len() as f64;
    Ok(SymmetricEigen::new(second)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Bound checks serialized into a suite summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerProductReport {
    pub noise_variance: f64,
    pub analytic: f64,
    pub estimate: MonteCarloEstimate,
    /// `|estimate - analytic| <= 3 standard errors`.
    pub within_3se: bool,
}

impl InnerProductReport {
    pub fn new(noise_variance: f64, analytic: f64, estimate: MonteCarloEstimate) -> Self {
        Self {
            noise_variance,
            analytic,
            estimate,
            within_3se: estimate.z_score(analytic) <= 3.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedtrain::Example;
    use crate::gradient_model::GradientMoments;
    use crate::rng::stream;

    #[test]
    fn mse_bound_arithmetic() {
        let b = mse_bound(10, 5, &[1.0; 5]);
        assert!((b - (2.0 + 4.0 / std::f64::consts::PI)).abs() < 1e-12);
        assert!((b - 3.2732).abs() < 1e-4);
        assert_eq!(mse_bound(10, 5, &[0.0; 5]), 0.0);
        let nus = [0.3, 1.2, 0.7];
        let doubled: Vec<f64> = nus.iter().map(|v| 2.0 * v).collect();
        assert!((mse_bound(7, 3, &doubled) - 4.0 * mse_bound(7, 3, &nus)).abs() < 1e-12);
    }

    #[test]
    fn empirical_mse_under_bound() {
        let ctx = AggregationContext::homogeneous(5, 1.0, 0.0, 1.0, 0.5).unwrap();
        let report = empirical_mse(&ctx, 20, 2_000, &mut stream(1, "mse", 0)).unwrap();
        assert!(report.satisfied, "{report:?}");
        assert!(report.margin_sigmas() > 2.0);
    }

    #[test]
    fn random_configs_respect_bound() {
        let mut rng = stream(2, "mse-configs", 0);
        for _ in 0..10 {
            let k = rng.random_range(1..=5);
            let ctx = AggregationContext::new(
                (0..k).map(|_| rng.random_range(0.1..3.0)).collect(),
                (0..k)
                    .map(|_| GradientMoments {
                        mean: rng.random_range(-1.0..1.0),
                        std: rng.random_range(0.2..2.0),
                    })
                    .collect(),
                rng.random_range(0.1..4.0),
            )
            .unwrap();
            let report = empirical_mse(&ctx, 10, 1_000, &mut rng).unwrap();
            assert!(report.satisfied, "{ctx:?} {report:?}");
        }
    }

    #[test]
    fn zero_variance_is_exact() {
        let ctx = AggregationContext::new(
            vec![1.0, 0.5],
            vec![
                GradientMoments {
                    mean: 0.3,
                    std: 0.0,
                },
                GradientMoments {
                    mean: -0.7,
                    std: 0.0,
                },
            ],
            0.5,
        )
        .unwrap();
        let report = empirical_mse(&ctx, 10, 100, &mut stream(3, "mse", 0)).unwrap();
        assert_eq!(report.empirical, 0.0);
        assert_eq!(report.analytic, 0.0);
        assert!(report.satisfied);
    }

    #[test]
    fn bayaircomp_beats_naive_on_paired_draws() {
        let ctx = AggregationContext::homogeneous(5, 1.0, 0.0, 1.0, 0.5).unwrap();
        let cmp =
            compare_estimators(&ctx, ChannelDraw::Fixed, 20_000, &mut stream(4, "cmp", 0)).unwrap();
        assert!(cmp.bayaircomp.mean < cmp.naive_mean.mean);
        assert!(cmp.bayaircomp.mean < cmp.scaled_majority.mean);
        assert!(cmp.naive_excess.mean > 3.0 * cmp.naive_excess.std_error);
    }

    #[test]
    fn inner_product_limits_values() {
        let ctx = AggregationContext::new(
            vec![1.0, 0.6],
            vec![
                GradientMoments {
                    mean: 0.0,
                    std: 1.0
                };
                2
            ],
            0.5,
        )
        .unwrap();
        assert_eq!(nu_true_sq(&ctx), 0.5);
        let (low, high) = inner_product_limits(10, &ctx);
        assert_eq!(low, 5.0);
        assert!((high - 1.816_901_138_162_093).abs() < 1e-12);
        assert!(low > 0.0 && high > 0.0);
    }

    #[test]
    fn inner_product_low_snr() {
        let ctx = AggregationContext::new(
            vec![1.0, 0.6],
            vec![
                GradientMoments {
                    mean: 0.0,
                    std: 1.0
                };
                2
            ],
            0.5,
        )
        .unwrap();
        let est =
            grad_error_inner_product(&ctx, 10, 20_000, Some(1e8), &mut stream(5, "ip", 0)).unwrap();
        assert!(est.z_score(5.0) < 3.0, "{est:?}");
    }

    #[test]
    fn convergence_bound_arithmetic() {
        let b = convergence_bound(100, 0.1, 1.0, 1.0, 1.0).unwrap();
        let expected = (1.0 / 0.095 + (1.0 + 100f64.ln()) * 0.05 / 0.95) / 10.0;
        assert!((b - expected).abs() < 1e-12);
        assert!((b - 1.0821).abs() < 1e-3);
    }

    #[test]
    fn convergence_bound_noiseless_is_inverse_sqrt() {
        let b100 = convergence_bound(100, 0.1, 1.0, 0.0, 1.0).unwrap();
        let b400 = convergence_bound(400, 0.1, 1.0, 0.0, 1.0).unwrap();
        assert!((b100 / b400 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn convergence_bound_decays() {
        let at = |t| convergence_bound(t, 0.1, 1.0, 1.0, 1.0).unwrap();
        assert!(at(1_000_000) < at(10_000) && at(10_000) < at(100));
        let grid: Vec<f64> = (8..2000).map(at).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn convergence_bound_rejects_large_steps() {
        let err = convergence_bound(10, 2.0, 1.0, 1.0, 1.0).unwrap_err();
        assert!(err
            .to_string()
            .contains("step size violates smoothness condition"));
        assert!(convergence_bound(0, 0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn smoothness_of_axis_aligned_data() {
        let data = Dataset::new(
            vec![
                Example {
                    features: vec![2.0, 0.0],
                    label: 0.0,
                },
                Example {
                    features: vec![0.0, 1.0],
                    label: 0.0,
                },
            ],
            None,
        )
        .unwrap();
        assert!((linear_regression_smoothness(&data).unwrap() - 2.0).abs() < 1e-12);
    }
}
