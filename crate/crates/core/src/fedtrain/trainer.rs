use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::data::{Dataset, DeviceDataset};
use super::model::{local_gradient, Model};
use crate::aggregation::{AggregationContext, Aggregator};
use crate::channel::{mac_receive, sample_fading, CellGeometry, HataParams, PathLossMode};
use crate::gradient_model::{compress, MomentQuantizer};
use crate::precoding::PrecoderSpec;
use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `gamma / (t + 1)`.
    InverseTime,
}

pub fn lr_schedule(schedule: LrSchedule, t: usize, base: f64) -> f64 {
    match schedule {
        LrSchedule::Constant => base,
        LrSchedule::InverseTime => base / (t as f64 + 1.0),
    }
}

/// `w - lr * estimate`.
pub fn global_update_gd(w: &[f64], estimate: &[f64], lr: f64) -> Vec<f64> {
    w.iter().zip(estimate).map(|(wi, e)| wi - lr * e).collect()
}

/// `w - lr * (momentum * prev + estimate)`; `prev` is zero at the first round.
pub fn global_update_momentum(
    w: &[f64],
    estimate: &[f64],
    prev: &[f64],
    lr: f64,
    momentum: f64,
) -> Vec<f64> {
    w.iter()
        .zip(estimate)
        .zip(prev)
        .map(|((wi, e), p)| wi - lr * (momentum * p + e))
        .collect()
}

/// Whether the server update uses the average-gradient estimate as is, or
/// scaled to the sum over participating devices. Majority vote yields a
/// sign vector rather than an average estimate and is never rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateConvention {
    #[default]
    Average,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub rounds: usize,
    pub base_lr: f64,
    pub lr_schedule: LrSchedule,
    pub momentum: f64,
    pub devices_total: usize,
    pub devices_per_round: usize,
    pub devices_per_resource: usize,
    pub batch_size: usize,
    pub precoder: PrecoderSpec,
    pub aggregator: Aggregator,
    pub convention: EstimateConvention,
    pub noise_variance: f64,
    /// When false the reception is noiseless; the aggregator still assumes
    /// `noise_variance`.
    pub channel_noise: bool,
    pub path_loss: PathLossMode,
    pub hata: HataParams,
    pub cell_radius_km: f64,
    /// `Some(B)` sends `(mu, nu)` through the B-bit moment quantizer.
    pub moment_bits: Option<u32>,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            rounds: 500,
            base_lr: 1e-3,
            lr_schedule: LrSchedule::Constant,
            momentum: 0.9,
            devices_total: 100,
            devices_per_round: 10,
            devices_per_resource: 5,
            batch_size: 32,
            precoder: PrecoderSpec::sign_align(),
            aggregator: Aggregator::BayAirComp,
            convention: EstimateConvention::Average,
            noise_variance: crate::channel::DEFAULT_NOISE_VARIANCE,
            channel_noise: true,
            path_loss: PathLossMode::Unit,
            hata: HataParams::default(),
            cell_radius_km: 1.0,
            moment_bits: None,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.rounds == 0 {
            errors.push("rounds must be positive".into());
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            errors.push(format!("base_lr must be positive (got {})", self.base_lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            errors.push(format!(
                "momentum must lie in [0, 1) (got {})",
                self.momentum
            ));
        }
        if self.devices_per_resource == 0 {
            errors.push("devices_per_resource must be positive".into());
        } else if !self
            .devices_per_round
            .is_multiple_of(self.devices_per_resource)
        {
            errors.push(format!(
                "devices_per_round ({}) must be divisible by devices_per_resource ({})",
                self.devices_per_round, self.devices_per_resource
            ));
        }
        if self.devices_per_round == 0 || self.devices_per_round > self.devices_total {
            errors.push(format!(
                "devices_per_round must be in 1..={} (got {})",
                self.devices_total, self.devices_per_round
            ));
        }
        if self.devices_per_resource > crate::aggregation::K_MAX {
            errors.push(format!(
                "devices_per_resource exceeds the enumeration bound {}",
                crate::aggregation::K_MAX
            ));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            errors.push(format!(
                "noise_variance must be positive (got {})",
                self.noise_variance
            ));
        }
        if let Err(e) = self.precoder.validate() {
            errors.push(e.to_string());
        }
        if let Err(e) = self.hata.validate() {
            errors.push(e.to_string());
        }
        if self.cell_radius_km.is_nan() || self.cell_radius_km <= 0.0 {
            errors.push("cell_radius_km must be positive".into());
        }
        if let Some(b) = self.moment_bits {
            if b == 0 || b > 52 {
                errors.push(format!("moment_bits must be in 1..=52 (got {b})"));
            }
        }
        errors
    }

    pub fn resource_blocks(&self) -> usize {
        self.devices_per_round / self.devices_per_resource
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    /// Global loss at the weights the round started from.
    pub loss: f64,
    /// `||g_true||^2`, `g_true` the average local gradient of the sampled devices.
    pub grad_norm_sq: f64,
    /// `||f* - g_true||^2`.
    pub agg_mse: f64,
    pub accuracy: Option<f64>,
    pub receptions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    pub weights: Vec<f64>,
    pub prev_estimate: Vec<f64>,
    pub round: usize,
    /// Per-device scale of the moment quantizer, tracked identically by
    /// device and server from previously reported std values.
    pub moment_scales: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub metrics: Vec<RoundMetrics>,
    pub final_state: TrainerState,
    pub final_loss: f64,
    pub final_accuracy: Option<f64>,
}

/// A federated learning deployment: model, device shards, cell geometry.
#[derive(Debug, Clone)]
pub struct Federation {
    pub config: TrainingConfig,
    pub model: Model,
    pub devices: Vec<DeviceDataset>,
    pub test: Option<Dataset>,
    pub geometry: CellGeometry,
}

impl Federation {
    pub fn new(
        config: TrainingConfig,
        model: Model,
        devices: Vec<DeviceDataset>,
        test: Option<Dataset>,
    ) -> Result<Self> {
        let errors = config.validate();
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        model.validate()?;
        if devices.len() != config.devices_total {
            return Err(Error::LengthMismatch {
                expected: config.devices_total,
                found: devices.len(),
            });
        }
        if devices.iter().any(DeviceDataset::is_empty) {
            return Err(Error::EmptyDataset);
        }
        let geometry = CellGeometry::sample_uniform(
            config.devices_total,
            config.cell_radius_km,
            config.hata,
            &mut stream(config.seed, "geometry", 0),
        )?;
        Ok(Self {
            config,
            model,
            devices,
            test,
            geometry,
        })
    }

    pub fn initial_state(&self) -> TrainerState {
        let weights = self
            .model
            .init_weights(&mut stream(self.config.seed, "init", 0));
        let m = weights.len();
        TrainerState {
            weights,
            prev_estimate: vec![0.0; m],
            round: 0,
            moment_scales: vec![1.0; self.devices.len()],
        }
    }

    /// Global training loss: mean of the local losses over all devices.
    pub fn global_loss(&self, w: &[f64]) -> f64 {
        let per_device: f64 = self
            .devices
            .iter()
            .map(|d| self.model.loss(w, &d.examples))
            .sum();
        per_device / self.devices.len() as f64
    }

    pub fn accuracy(&self, w: &[f64]) -> Option<f64> {
        match &self.test {
            Some(test) => self.model.accuracy(w, &test.examples),
            None => self
                .model
                .accuracy(w, self.devices.iter().flat_map(|d| d.examples.iter())),
        }
    }

    /// One communication round: sample devices, compress and transmit
    /// their gradients block by block, aggregate, update the model.
    pub fn run_round(&self, state: &TrainerState) -> Result<(TrainerState, RoundMetrics)> {
        let cfg = &self.config;
        let t = state.round;
        let seed = cfg.seed;
        let m = state.weights.len();

        let mut sampling = stream(seed, "sampling", t as u64);
        let picked =
            index::sample(&mut sampling, cfg.devices_total, cfg.devices_per_round).into_vec();

        let mut g_true = vec![0.0; m];
        let mut estimate = vec![0.0; m];
        let mut moment_scales = state.moment_scales.clone();
        let blocks = cfg.resource_blocks();

        for (b, members) in picked.chunks(cfg.devices_per_resource).enumerate() {
            let tag = (t * blocks + b) as u64;
            let amplitudes = self.geometry.amplitudes(members, cfg.path_loss)?;
            let channel = sample_fading(
                &mut stream(seed, "channel", tag),
                &amplitudes,
                cfg.noise_variance,
            )?;

            let mut transmissions = Vec::with_capacity(members.len());
            let mut reported = Vec::with_capacity(members.len());
            let mut gains = Vec::with_capacity(members.len());
            for (&k, &h) in members.iter().zip(&channel.coefficients) {
                let mut batch_rng = stream(seed, "batch", (t * cfg.devices_total + k) as u64);
                let g = local_gradient(
                    &self.model,
                    &state.weights,
                    &self.devices[k],
                    cfg.batch_size,
                    &mut batch_rng,
                )?;
                for (acc, v) in g_true.iter_mut().zip(&g) {
                    *acc += v;
                }
                let (moments, signs) = compress(&g).map_err(|_| Error::NonFiniteMetric {
                    round: t,
                    metric: "gradient",
                })?;
                if !(moments.mean.is_finite() && moments.std.is_finite()) {
                    return Err(Error::NonFiniteMetric {
                        round: t,
                        metric: "gradient moments",
                    });
                }
                let moments = match cfg.moment_bits {
                    Some(bits) => {
                        let q = MomentQuantizer { bits }.quantize(&moments, moment_scales[k])?;
                        moment_scales[k] = q.std.max(1e-12);
                        q
                    }
                    None => moments,
                };
                transmissions.push(cfg.precoder.precode(h, &signs));
                reported.push(moments);
                gains.push(cfg.precoder.effective_gain(h));
            }

            let mut noise_rng = stream(seed, "noise", tag);
            let y = mac_receive(
                &transmissions,
                &channel,
                cfg.channel_noise.then_some(&mut noise_rng),
            )?;
            let ctx = AggregationContext::new(gains, reported, cfg.noise_variance)?;
            let block_estimate = cfg.aggregator.aggregate(&y, &ctx)?;
            for (acc, v) in estimate.iter_mut().zip(&block_estimate) {
                *acc += v / blocks as f64;
            }
        }

        let n = cfg.devices_per_round as f64;
        g_true.iter_mut().for_each(|v| *v /= n);
        let scale = match (cfg.convention, cfg.aggregator) {
            (EstimateConvention::Sum, Aggregator::BayAirComp | Aggregator::NaiveMean) => n,
            _ => 1.0,
        };
        // error accounting stays on the average scale
        estimate.iter_mut().for_each(|v| *v *= scale);

        let loss = self.global_loss(&state.weights);
        let grad_norm_sq: f64 = g_true.iter().map(|v| v * v).sum();
        let agg_mse: f64 = estimate
            .iter()
            .zip(&g_true)
            .map(|(e, g)| (e / scale - g).powi(2))
            .sum();
        for (value, metric) in [
            (loss, "loss"),
            (grad_norm_sq, "grad_norm_sq"),
            (agg_mse, "agg_mse"),
        ] {
            if !value.is_finite() {
                return Err(Error::NonFiniteMetric { round: t, metric });
            }
        }

        let lr = lr_schedule(cfg.lr_schedule, t, cfg.base_lr);
        let weights = global_update_momentum(
            &state.weights,
            &estimate,
            &state.prev_estimate,
            lr,
            cfg.momentum,
        );
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteMetric {
                round: t,
                metric: "weights",
            });
        }

        let metrics = RoundMetrics {
            round: t,
            loss,
            grad_norm_sq,
            agg_mse,
            accuracy: self.accuracy(&state.weights),
            receptions: blocks,
        };
        let next = TrainerState {
            weights,
            prev_estimate: estimate,
            round: t + 1,
            moment_scales,
        };
        Ok((next, metrics))
    }

    pub fn run(&self) -> Result<TrainingRun> {
        self.run_with(|_| {})
    }

    /// Runs every round, handing each round's metrics to `observe`.
    pub fn run_with(&self, mut observe: impl FnMut(&RoundMetrics)) -> Result<TrainingRun> {
        let mut state = self.initial_state();
        let mut metrics = Vec::with_capacity(self.config.rounds);
        for _ in 0..self.config.rounds {
            let (next, record) = self.run_round(&state)?;
            observe(&record);
            metrics.push(record);
            state = next;
        }
        let final_loss = self.global_loss(&state.weights);
        if !final_loss.is_finite() {
            return Err(Error::NonFiniteMetric {
                round: state.round,
                metric: "loss",
            });
        }
        let final_accuracy = self.accuracy(&state.weights);
        Ok(TrainingRun {
            metrics,
            final_state: state,
            final_loss,
            final_accuracy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedtrain::data::Example;

    #[test]
    fn gd_update() {
        assert_eq!(
            global_update_gd(&[1.0, 1.0], &[1.0, -1.0], 0.1),
            vec![0.9, 1.1]
        );
        assert_eq!(
            global_update_gd(&[0.3, -2.0], &[0.0, 0.0], 0.5),
            vec![0.3, -2.0]
        );
    }

    #[test]
    fn gd_steps_compose() {
        let w = [0.2, -0.7, 1.5];
        let e = [0.25, -0.5, 1.0];
        let two = global_update_gd(&global_update_gd(&w, &e, 0.125), &e, 0.375);
        let one = global_update_gd(&w, &e, 0.5);
        for (a, b) in two.iter().zip(&one) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn momentum_update() {
        let w = [0.4, -0.1];
        let e = [1.0, 2.0];
        let prev = [3.0, -1.0];
        assert_eq!(
            global_update_momentum(&w, &e, &prev, 0.1, 0.0),
            global_update_gd(&w, &e, 0.1)
        );
        assert_eq!(
            global_update_momentum(&w, &e, &[0.0, 0.0], 0.1, 0.9),
            global_update_gd(&w, &e, 0.1)
        );
        let out = global_update_momentum(&[0.0], &[1.0], &[1.0], 0.1, 0.9);
        assert!((out[0] + 0.19).abs() < 1e-15);
    }

    #[test]
    fn schedules() {
        assert_eq!(lr_schedule(LrSchedule::InverseTime, 0, 0.001), 0.001);
        assert!((lr_schedule(LrSchedule::InverseTime, 9, 0.001) - 0.0001).abs() < 1e-18);
        assert_eq!(lr_schedule(LrSchedule::Constant, 9, 0.001), 0.001);
        for t in [1usize, 10, 1000] {
            let harmonic: f64 = (0..t).map(|i| 1.0 / (i as f64 + 1.0)).sum();
            assert!(harmonic <= 1.0 + (t as f64).ln());
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainingConfig::default();
        assert!(cfg.validate().is_empty());
        cfg.devices_per_round = 9;
        cfg.momentum = 1.0;
        let errors = cfg.validate();
        assert_eq!(errors.len(), 2, "{errors:?}");
    }

    fn tiny_regression(cfg: TrainingConfig) -> Federation {
        let shards = (0..cfg.devices_total)
            .map(|k| {
                let x = 1.0 + k as f64 * 0.1;
                DeviceDataset::new(
                    vec![
                        Example {
                            features: vec![x, 1.0],
                            label: 2.0 * x - 1.0,
                        },
                        Example {
                            features: vec![-x, 1.0],
                            label: -2.0 * x - 1.0,
                        },
                    ],
                    false,
                )
            })
            .collect();
        Federation::new(cfg, Model::linear_regression(2), shards, None).unwrap()
    }

    #[test]
    fn two_receptions_per_round() {
        let cfg = TrainingConfig {
            devices_total: 20,
            rounds: 3,
            ..TrainingConfig::default()
        };
        let run = tiny_regression(cfg).run().unwrap();
        assert!(run.metrics.iter().all(|m| m.receptions == 2));
    }

    #[test]
    fn rounds_are_deterministic() {
        let cfg = TrainingConfig {
            devices_total: 20,
            rounds: 5,
            ..TrainingConfig::default()
        };
        let a = tiny_regression(cfg.clone()).run().unwrap();
        let b = tiny_regression(cfg.clone()).run().unwrap();
        assert_eq!(a.metrics, b.metrics);
        let c = tiny_regression(TrainingConfig { seed: 1, ..cfg })
            .run()
            .unwrap();
        assert_ne!(a.metrics, c.metrics);
    }

    #[test]
    fn single_device_noiseless_step_descends() {
        let cfg = TrainingConfig {
            devices_total: 1,
            devices_per_round: 1,
            devices_per_resource: 1,
            channel_noise: false,
            noise_variance: 1e-8,
            momentum: 0.0,
            rounds: 1,
            ..TrainingConfig::default()
        };
        let fed = tiny_regression(cfg);
        let state = TrainerState {
            weights: vec![0.5, 0.3],
            ..fed.initial_state()
        };
        let (next, _) = fed.run_round(&state).unwrap();
        let g = fed.model.gradient(&state.weights, &fed.devices[0].examples);
        let step: Vec<f64> = next
            .weights
            .iter()
            .zip(&state.weights)
            .map(|(a, b)| a - b)
            .collect();
        let inner: f64 = step.iter().zip(&g).map(|(s, gi)| -s * gi).sum();
        assert!(inner >= 0.0, "update does not descend: {inner}");
        // At sigma^2 -> 0, A_1 = sign(gbar): the step is mu + sqrt(2/pi) nu sign(gbar).
        let (mom, signs) = crate::gradient_model::compress(&g).unwrap();
        for (s, sg) in step.iter().zip(signs.iter()) {
            let expected = -1e-3 * (mom.mean + crate::SQRT_2_OVER_PI * mom.std * sg);
            assert!((s - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn sum_convention_scales_update() {
        let base = TrainingConfig {
            devices_total: 10,
            rounds: 1,
            momentum: 0.0,
            ..TrainingConfig::default()
        };
        let avg = tiny_regression(base.clone());
        let sum = tiny_regression(TrainingConfig {
            convention: EstimateConvention::Sum,
            ..base
        });
        let s0 = avg.initial_state();
        let (a, ma) = avg.run_round(&s0).unwrap();
        let (b, mb) = sum.run_round(&s0).unwrap();
        assert!((ma.agg_mse - mb.agg_mse).abs() < 1e-12);
        for ((wa, wb), w0) in a.weights.iter().zip(&b.weights).zip(&s0.weights) {
            assert!(((wb - w0) - 10.0 * (wa - w0)).abs() < 1e-12);
        }
    }

    #[test]
    fn quantized_moments_path_runs() {
        let cfg = TrainingConfig {
            devices_total: 10,
            rounds: 4,
            moment_bits: Some(8),
            ..TrainingConfig::default()
        };
        let run = tiny_regression(cfg).run().unwrap();
        assert_eq!(run.metrics.len(), 4);
        assert!(run.final_state.moment_scales.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn full_batch_convex_descent_is_monotone() {
        let cfg = TrainingConfig {
            devices_total: 1,
            devices_per_round: 1,
            devices_per_resource: 1,
            channel_noise: false,
            noise_variance: 1e-8,
            momentum: 0.0,
            base_lr: 0.05,
            rounds: 200,
            ..TrainingConfig::default()
        };
        let run = tiny_regression(cfg).run().unwrap();
        let losses: Vec<f64> = run.metrics.iter().map(|m| m.loss).collect();
        assert!(
            losses.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "{losses:?}"
        );
        assert!(run.final_loss < losses[0]);
    }
}
