//! Experiment runner: configuration, data loading, and the four suites
//! (`train`, `curves`, `bounds`, `oracle`) that write CSV/JSON artifacts.

mod config;
mod dataset;
mod output;

use std::fs;
use std::path::PathBuf;

use rand::Rng;
use serde::Serialize;

pub use config::{DatasetKind, ExperimentConfig, PartitionKind, Suite};
pub use dataset::{load_dataset, read_csv_dataset, LoadedData};
pub use output::{fmt_f64, write_csv, write_json, ArtifactHeader};

use crate::aggregation::{curve, linear_grid, mmse_oracle, AggregationContext, BayAirComp};
use crate::analysis::{
    compare_estimators, convergence_bound, empirical_mse, grad_error_inner_product,
    inner_product_limits, linear_regression_smoothness, nu_true_sq, BoundReport,
    EstimatorComparison, InnerProductReport, MonteCarloEstimate,
};
use crate::fedtrain::{partition_heterogeneous, partition_iid, Federation, Model, ModelKind};
use crate::gradient_model::GradientMoments;
use crate::rng::stream;
use crate::{Error, Result};

/// Files written by one suite run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteOutcome {
    pub config_hash: String,
    pub artifacts: Vec<PathBuf>,
}

fn model_for(cfg: &ExperimentConfig, input_dim: usize) -> Model {
    match cfg.model {
        ModelKind::LinearRegression => Model::linear_regression(input_dim),
        ModelKind::LogisticRegression => Model::logistic_regression(input_dim, cfg.classes),
        ModelKind::SmallMlp => Model::small_mlp(input_dim, cfg.hidden, cfg.classes),
    }
}

/// Loads the data, partitions it over the devices and places the cell.
pub fn build_federation(cfg: &ExperimentConfig) -> Result<Federation> {
    let errors = cfg.validate();
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let data = load_dataset(cfg)?;
    let mut rng = stream(cfg.seed, "partition", 0);
    let devices = match cfg.partition {
        PartitionKind::Heterogeneous => partition_heterogeneous(
            &data.train,
            cfg.devices_total,
            cfg.classes_per_device,
            &mut rng,
        )?,
        PartitionKind::Iid => partition_iid(&data.train, cfg.devices_total, &mut rng)?,
    };
    let model = model_for(cfg, data.train.feature_dim);
    Federation::new(cfg.training_config(), model, devices, data.test)
}

/// Runs the configured suite and writes its artifacts into `output_dir`.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    let errors = cfg.validate();
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let header = ArtifactHeader {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        suite: cfg.suite.to_string(),
    };
    let artifacts = match cfg.suite {
        Suite::Train => train_suite(cfg, &header)?,
        Suite::Curves => curves_suite(cfg, &header)?,
        Suite::Bounds => bounds_suite(cfg, &header)?,
        Suite::Oracle => oracle_suite(cfg, &header)?,
    };
    Ok(SuiteOutcome {
        config_hash: header.config_hash,
        artifacts,
    })
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    config: ExperimentConfig,
    rounds: usize,
    initial_loss: f64,
    final_loss: f64,
    loss_reduction: f64,
    final_accuracy: Option<f64>,
    mean_agg_mse: f64,
}

fn train_suite(cfg: &ExperimentConfig, header: &ArtifactHeader) -> Result<Vec<PathBuf>> {
    let federation = build_federation(cfg)?;
    let run = federation.run()?;
    let rows: Vec<Vec<String>> = run
        .metrics
        .iter()
        .map(|m| {
            vec![
                m.round.to_string(),
                fmt_f64(m.loss),
                fmt_f64(m.grad_norm_sq),
                fmt_f64(m.agg_mse),
                m.accuracy.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    let metrics_path = cfg.output_dir.join("metrics.csv");
    write_csv(
        &metrics_path,
        header,
        &[(
            "aggregator",
            serde_json::to_value(cfg.aggregator)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
        )],
        &["round", "loss", "grad_norm_sq", "agg_mse", "accuracy"],
        &rows,
    )?;

    let initial_loss = run.metrics.first().map_or(run.final_loss, |m| m.loss);
    let summary = TrainSummary {
        config: cfg.identity(),
        rounds: run.metrics.len(),
        initial_loss,
        final_loss: run.final_loss,
        loss_reduction: 1.0 - run.final_loss / initial_loss,
        final_accuracy: run.final_accuracy,
        mean_agg_mse: run.metrics.iter().map(|m| m.agg_mse).sum::<f64>() / run.metrics.len() as f64,
    };
    let summary_path = cfg.output_dir.join("summary.json");
    write_json(&summary_path, header, &summary)?;
    Ok(vec![metrics_path, summary_path])
}

fn curves_suite(cfg: &ExperimentConfig, header: &ArtifactHeader) -> Result<Vec<PathBuf>> {
    let grid = linear_grid(-cfg.curve_y_max, cfg.curve_y_max, cfg.curve_points);
    let k = cfg.curve_devices;
    let mut strong = vec![1.0; k];
    strong[0] = cfg.curve_strong_gain;
    let mut written = Vec::new();
    for &noise_variance in &cfg.curve_noise_variances {
        for (name, gains) in [("uniform", vec![1.0; k]), ("strong", strong.clone())] {
            let ctx = AggregationContext::new(
                gains.clone(),
                vec![
                    GradientMoments {
                        mean: 0.0,
                        std: 1.0
                    };
                    k
                ],
                noise_variance,
            )?;
            let rows: Vec<Vec<String>> = curve(&ctx, &grid)?
                .iter()
                .map(|p| {
                    vec![
                        fmt_f64(p.y),
                        fmt_f64(p.bayaircomp),
                        fmt_f64(p.majority),
                        fmt_f64(p.naive),
                    ]
                })
                .collect();
            let path = cfg
                .output_dir
                .join(format!("curve_{name}_nv{noise_variance}.csv"));
            let snr = gains.iter().map(|g| g * g).sum::<f64>() / k as f64 / noise_variance;
            let gains_text: Vec<String> = gains.iter().map(|g| g.to_string()).collect();
            write_csv(
                &path,
                header,
                &[
                    ("devices", k.to_string()),
                    ("gains", gains_text.join(" ")),
                    ("noise_variance", noise_variance.to_string()),
                    ("snr_definition", "P * mean(h^2) / sigma^2 with P = 1".into()),
                    ("snr", snr.to_string()),
                    ("prior", "mean 0, std 1".into()),
                ],
                &["y", "bayaircomp", "majority", "naive"],
                &rows,
            )?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
struct MseBoundResult {
    devices: usize,
    coordinates: usize,
    noise_variance: f64,
    report: BoundReport,
    margin_sigmas: f64,
}

#[derive(Debug, Serialize)]
struct DominanceResult {
    devices: usize,
    noise_variance: f64,
    comparison: EstimatorComparison,
    naive_margin: f64,
    majority_margin: f64,
}

#[derive(Debug, Serialize)]
struct InnerProductResult {
    gains: Vec<f64>,
    coordinates: usize,
    nu_true_sq: f64,
    low_snr: InnerProductReport,
    high_snr: InnerProductReport,
    /// Diagnostic only: the estimate at the configured noise variance and
    /// whether it lies between the two limits (within 3 standard errors).
    mid_snr: MonteCarloEstimate,
    mid_snr_in_corridor: bool,
}

#[derive(Debug, Serialize)]
struct ConvergencePoint {
    rounds: usize,
    bound: f64,
}

#[derive(Debug, Serialize)]
struct ConvergenceResult {
    gamma: f64,
    smoothness: f64,
    sigma_mse_sq: f64,
    loss_gap: f64,
    points: Vec<ConvergencePoint>,
}

#[derive(Debug, Serialize)]
struct BoundsSummary {
    mse_bound: MseBoundResult,
    dominance: DominanceResult,
    inner_product: InnerProductResult,
    convergence: ConvergenceResult,
}

/// Noise variances standing in for SNR -> 0 and SNR -> infinity.
pub const LOW_SNR_NOISE: f64 = 1e8;
pub const HIGH_SNR_NOISE: f64 = 1e-8;

fn bounds_suite(cfg: &ExperimentConfig, header: &ArtifactHeader) -> Result<Vec<PathBuf>> {
    let unit = GradientMoments {
        mean: 0.0,
        std: 1.0,
    };
    let ctx =
        AggregationContext::homogeneous(cfg.bound_devices, 1.0, 0.0, 1.0, cfg.noise_variance)?;
    let report = empirical_mse(
        &ctx,
        cfg.bound_coordinates,
        cfg.bound_trials,
        &mut stream(cfg.seed, "mse-bound", 0),
    )?;
    let mse_bound = MseBoundResult {
        devices: cfg.bound_devices,
        coordinates: cfg.bound_coordinates,
        noise_variance: cfg.noise_variance,
        margin_sigmas: report.margin_sigmas(),
        report,
    };

    let comparison = compare_estimators(
        &ctx,
        cfg.dominance_channel,
        cfg.dominance_trials,
        &mut stream(cfg.seed, "dominance", 0),
    )?;
    let dominance = DominanceResult {
        devices: cfg.bound_devices,
        noise_variance: cfg.noise_variance,
        naive_margin: comparison.naive_margin(),
        majority_margin: comparison.majority_margin(),
        comparison,
    };

    let k = cfg.corollary_gains.len();
    let ip_ctx = AggregationContext::new(
        cfg.corollary_gains.clone(),
        vec![unit; k],
        cfg.noise_variance,
    )?;
    let m = cfg.corollary_coordinates;
    let (low, high) = inner_product_limits(m, &ip_ctx);
    let estimate = |noise: f64, index: u64| {
        grad_error_inner_product(
            &ip_ctx,
            m,
            cfg.corollary_trials,
            Some(noise),
            &mut stream(cfg.seed, "inner-product", index),
        )
    };
    let mid = estimate(cfg.noise_variance, 2)?;
    let inner_product = InnerProductResult {
        gains: cfg.corollary_gains.clone(),
        coordinates: m,
        nu_true_sq: nu_true_sq(&ip_ctx),
        low_snr: InnerProductReport::new(LOW_SNR_NOISE, low, estimate(LOW_SNR_NOISE, 0)?),
        high_snr: InnerProductReport::new(HIGH_SNR_NOISE, high, estimate(HIGH_SNR_NOISE, 1)?),
        mid_snr_in_corridor: mid.mean >= high - 3.0 * mid.std_error
            && mid.mean <= low + 3.0 * mid.std_error,
        mid_snr: mid,
    };

    let smoothness = if cfg.model == ModelKind::LinearRegression {
        linear_regression_smoothness(&load_dataset(cfg)?.train)?
    } else {
        cfg.convergence_smoothness
    };
    let points = cfg
        .convergence_rounds
        .iter()
        .map(|&t| {
            Ok(ConvergencePoint {
                rounds: t,
                bound: convergence_bound(
                    t,
                    cfg.convergence_gamma,
                    smoothness,
                    cfg.convergence_sigma_mse,
                    cfg.convergence_loss_gap,
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let convergence = ConvergenceResult {
        gamma: cfg.convergence_gamma,
        smoothness,
        sigma_mse_sq: cfg.convergence_sigma_mse,
        loss_gap: cfg.convergence_loss_gap,
        points,
    };

    let path = cfg.output_dir.join("bounds.json");
    write_json(
        &path,
        header,
        &BoundsSummary {
            mse_bound,
            dominance,
            inner_product,
            convergence,
        },
    )?;
    Ok(vec![path])
}

/// One closed-form-vs-quadrature comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCase {
    pub devices: usize,
    pub case: usize,
    pub context: AggregationContext,
    pub y: f64,
    pub closed_form: f64,
    pub oracle: f64,
}

impl OracleCase {
    pub fn abs_diff(&self) -> f64 {
        (self.closed_form - self.oracle).abs()
    }
}

/// Random configuration with `|h| in [0.1, 3]`, `nu in [0.2, 2]`,
/// `mu in [-1, 1]`, `sigma^2 in [0.1, 4]`, and `y in [-10, 10]`.
pub fn random_oracle_config<R: Rng + ?Sized>(
    k: usize,
    rng: &mut R,
) -> Result<(AggregationContext, f64)> {
    let gains = (0..k).map(|_| rng.random_range(0.1..=3.0)).collect();
    let moments = (0..k)
        .map(|_| GradientMoments {
            mean: rng.random_range(-1.0..=1.0),
            std: rng.random_range(0.2..=2.0),
        })
        .collect();
    let noise = rng.random_range(0.1..=4.0);
    let y = rng.random_range(-10.0..=10.0);
    Ok((AggregationContext::new(gains, moments, noise)?, y))
}

/// `configs` random cases per device count `1..=max_devices`.
pub fn oracle_cases(
    seed: u64,
    max_devices: usize,
    configs: usize,
    order: usize,
) -> Result<Vec<OracleCase>> {
    let mut cases = Vec::with_capacity(max_devices * configs);
    for k in 1..=max_devices {
        let mut rng = stream(seed, "oracle", k as u64);
        for case in 0..configs {
            let (context, y) = random_oracle_config(k, &mut rng)?;
            let closed_form = BayAirComp::new(context.clone())?.estimate(y);
            let oracle = mmse_oracle(y, &context, order)?;
            cases.push(OracleCase {
                devices: k,
                case,
                context,
                y,
                closed_form,
                oracle,
            });
        }
    }
    Ok(cases)
}

#[derive(Debug, Serialize)]
struct OracleSummary {
    order: usize,
    configs_per_k: usize,
    max_abs_diff: Vec<(usize, f64)>,
}

fn oracle_suite(cfg: &ExperimentConfig, header: &ArtifactHeader) -> Result<Vec<PathBuf>> {
    let cases = oracle_cases(
        cfg.seed,
        cfg.oracle_max_devices,
        cfg.oracle_configs,
        cfg.oracle_order,
    )?;
    let rows: Vec<Vec<String>> = cases
        .iter()
        .map(|c| {
            vec![
                c.devices.to_string(),
                c.case.to_string(),
                fmt_f64(c.y),
                fmt_f64(c.context.noise_variance),
                fmt_f64(c.closed_form),
                fmt_f64(c.oracle),
                fmt_f64(c.abs_diff()),
            ]
        })
        .collect();
    let table = cfg.output_dir.join("oracle.csv");
    write_csv(
        &table,
        header,
        &[("quadrature_order", cfg.oracle_order.to_string())],
        &[
            "k",
            "case",
            "y",
            "noise_variance",
            "bayaircomp",
            "oracle",
            "abs_diff",
        ],
        &rows,
    )?;
    let max_abs_diff = (1..=cfg.oracle_max_devices)
        .map(|k| {
            let worst = cases
                .iter()
                .filter(|c| c.devices == k)
                .map(OracleCase::abs_diff)
                .fold(0.0, f64::max);
            (k, worst)
        })
        .collect();
    let summary = cfg.output_dir.join("oracle_summary.json");
    write_json(
        &summary,
        header,
        &OracleSummary {
            order: cfg.oracle_order,
            configs_per_k: cfg.oracle_configs,
            max_abs_diff,
        },
    )?;
    Ok(vec![table, summary])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(suite: Suite, dir: &std::path::Path) -> ExperimentConfig {
        ExperimentConfig {
            suite,
            output_dir: dir.to_path_buf(),
            rounds: 5,
            samples: 400,
            test_samples: 100,
            devices_total: 20,
            curve_points: 11,
            curve_noise_variances: vec![0.5],
            bound_coordinates: 5,
            bound_trials: 1000,
            dominance_trials: 1000,
            corollary_trials: 1000,
            oracle_configs: 3,
            oracle_order: 32,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn invalid_config_is_reported() {
        let cfg = ExperimentConfig {
            momentum: 2.0,
            ..ExperimentConfig::default()
        };
        match run_suite(&cfg).unwrap_err() {
            Error::Config(errors) => assert!(errors.iter().any(|e| e.contains("momentum"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_suite_writes_headers() {
        let dir = tempfile::tempdir().unwrap();
        for suite in [Suite::Train, Suite::Curves, Suite::Bounds, Suite::Oracle] {
            let cfg = small(suite, &dir.path().join(suite.to_string()));
            let outcome = run_suite(&cfg).unwrap();
            assert!(!outcome.artifacts.is_empty());
            for path in &outcome.artifacts {
                let text = fs::read_to_string(path).unwrap();
                assert!(text.contains(&outcome.config_hash), "{path:?}");
                assert!(!text.contains('\r'));
            }
        }
    }

    #[test]
    fn train_suite_columns() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(Suite::Train, dir.path());
        run_suite(&cfg).unwrap();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(dir.path().join("metrics.csv"))
            .unwrap();
        let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(
            headers,
            ["round", "loss", "grad_norm_sq", "agg_mse", "accuracy"]
        );
        assert_eq!(reader.records().count(), 5);
    }

    #[test]
    fn oracle_cases_agree() {
        let cases = oracle_cases(1, 2, 5, 64).unwrap();
        assert_eq!(cases.len(), 10);
        assert!(cases.iter().all(|c| c.abs_diff() < 1e-5));
    }
}
