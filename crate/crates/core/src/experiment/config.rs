use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregation::{Aggregator, K_MAX, ORACLE_K_MAX};
use crate::analysis::ChannelDraw;
use crate::channel::{HataParams, PathLossMode, DEFAULT_NOISE_VARIANCE};
use crate::fedtrain::{EstimateConvention, LrSchedule, ModelKind, TrainingConfig};
use crate::precoding::{PrecoderKind, PrecoderSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    #[default]
    Train,
    Curves,
    Bounds,
    Oracle,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "curves" => Ok(Self::Curves),
            "bounds" => Ok(Self::Bounds),
            "oracle" => Ok(Self::Oracle),
            other => Err(Error::Config(vec![format!(
                "unknown suite `{other}` (expected train, curves, bounds or oracle)"
            )])),
        }
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Curves => "curves",
            Self::Bounds => "bounds",
            Self::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    SyntheticRegression,
    #[default]
    SyntheticClassification,
    CsvFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    #[default]
    Heterogeneous,
    Iid,
}

/// Flat experiment description. Every key is optional; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub seed: u64,
    pub output_dir: PathBuf,

    pub dataset: DatasetKind,
    pub dataset_path: Option<PathBuf>,
    pub label_column: String,
    /// Training examples drawn by the synthetic generators.
    pub samples: usize,
    /// Held-out examples drawn by the synthetic classification generator.
    pub test_samples: usize,
    pub features: usize,
    pub classes: usize,
    /// Std of the synthetic class centres (per coordinate).
    pub class_separation: f64,
    /// Std of the additive label noise of the synthetic regression task.
    pub label_noise: f64,
    /// Append a constant 1 feature to every example.
    pub bias: bool,
    pub partition: PartitionKind,
    pub classes_per_device: usize,

    pub model: ModelKind,
    pub hidden: usize,

    pub rounds: usize,
    pub base_lr: f64,
    pub lr_schedule: LrSchedule,
    pub momentum: f64,
    pub devices_total: usize,
    pub devices_per_round: usize,
    pub devices_per_resource: usize,
    pub batch_size: usize,
    pub precoder: PrecoderKind,
    pub power_limit: f64,
    pub truncation_threshold: f64,
    pub aggregator: Aggregator,
    pub convention: EstimateConvention,
    pub noise_variance: f64,
    pub channel_noise: bool,
    pub path_loss: PathLossMode,
    pub carrier_mhz: f64,
    pub bs_height_m: f64,
    pub ms_height_m: f64,
    pub cell_radius_km: f64,
    pub moment_bits: Option<u32>,

    pub curve_devices: usize,
    pub curve_points: usize,
    pub curve_y_max: f64,
    pub curve_noise_variances: Vec<f64>,
    /// `|h_1|` of the heterogeneous-channel curves; the others stay at 1.
    pub curve_strong_gain: f64,

    pub bound_devices: usize,
    pub bound_coordinates: usize,
    pub bound_trials: usize,
    pub dominance_trials: usize,
    pub dominance_channel: ChannelDraw,
    /// Channel magnitudes of the inner-product limit check. Distinct
    /// magnitudes keep every sign pattern identifiable at high SNR.
    pub corollary_gains: Vec<f64>,
    pub corollary_coordinates: usize,
    pub corollary_trials: usize,
    pub convergence_rounds: Vec<usize>,
    pub convergence_gamma: f64,
    /// Used unless the model is linear regression, whose constant is
    /// computed from the data.
    pub convergence_smoothness: f64,
    pub convergence_sigma_mse: f64,
    pub convergence_loss_gap: f64,

    pub oracle_configs: usize,
    pub oracle_order: usize,
    pub oracle_max_devices: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let training = TrainingConfig::default();
        let hata = HataParams::default();
        Self {
            suite: Suite::Train,
            seed: 0,
            output_dir: PathBuf::from("out"),

            dataset: DatasetKind::SyntheticClassification,
            dataset_path: None,
            label_column: "label".into(),
            samples: 2000,
            test_samples: 500,
            features: 10,
            classes: 10,
            class_separation: 2.0,
            label_noise: 0.1,
            bias: true,
            partition: PartitionKind::Heterogeneous,
            classes_per_device: 2,

            model: ModelKind::LogisticRegression,
            hidden: 16,

            rounds: training.rounds,
            base_lr: training.base_lr,
            lr_schedule: training.lr_schedule,
            momentum: training.momentum,
            devices_total: training.devices_total,
            devices_per_round: training.devices_per_round,
            devices_per_resource: training.devices_per_resource,
            batch_size: training.batch_size,
            precoder: PrecoderKind::SignAlign,
            power_limit: 1.0,
            truncation_threshold: PrecoderSpec::DEFAULT_THRESHOLD,
            aggregator: training.aggregator,
            convention: training.convention,
            noise_variance: DEFAULT_NOISE_VARIANCE,
            channel_noise: true,
            path_loss: PathLossMode::Unit,
            carrier_mhz: hata.carrier_mhz,
            bs_height_m: hata.bs_height_m,
            ms_height_m: hata.ms_height_m,
            cell_radius_km: 1.0,
            moment_bits: None,

            curve_devices: 5,
            curve_points: 2001,
            curve_y_max: 10.0,
            curve_noise_variances: vec![0.1, 0.5, 2.0],
            curve_strong_gain: 5.0,

            bound_devices: 5,
            bound_coordinates: 100,
            bound_trials: 10_000,
            dominance_trials: 100_000,
            dominance_channel: ChannelDraw::Rayleigh,
            corollary_gains: vec![1.0, 0.6],
            corollary_coordinates: 10,
            corollary_trials: 100_000,
            convergence_rounds: vec![100, 10_000, 1_000_000],
            convergence_gamma: 0.1,
            convergence_smoothness: 1.0,
            convergence_sigma_mse: 1.0,
            convergence_loss_gap: 1.0,

            oracle_configs: 100,
            oracle_order: crate::aggregation::DEFAULT_QUADRATURE_ORDER,
            oracle_max_devices: ORACLE_K_MAX,
        }
    }
}

fn parse_error(e: impl std::fmt::Display) -> Error {
    Error::Config(vec![e.to_string().trim_end().to_string()])
}

/// Parses a `--set` value as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parses `text` and applies `key=value` overrides on top of it.
    pub fn from_toml_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(parse_error)?;
        for (key, raw) in overrides {
            table.insert(key.clone(), override_value(raw));
        }
        toml::Value::Table(table).try_into().map_err(parse_error)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The configuration with `output_dir` cleared: where artifacts land
    /// does not change what they contain.
    pub fn identity(&self) -> Self {
        Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON encoding of [`Self::identity`], hex
    /// encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.identity()).expect("config serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn hata(&self) -> HataParams {
        HataParams {
            carrier_mhz: self.carrier_mhz,
            bs_height_m: self.bs_height_m,
            ms_height_m: self.ms_height_m,
        }
    }

    pub fn precoder_spec(&self) -> PrecoderSpec {
        PrecoderSpec {
            kind: self.precoder,
            power_limit: self.power_limit,
            truncation_threshold: self.truncation_threshold,
        }
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            rounds: self.rounds,
            base_lr: self.base_lr,
            lr_schedule: self.lr_schedule,
            momentum: self.momentum,
            devices_total: self.devices_total,
            devices_per_round: self.devices_per_round,
            devices_per_resource: self.devices_per_resource,
            batch_size: self.batch_size,
            precoder: self.precoder_spec(),
            aggregator: self.aggregator,
            convention: self.convention,
            noise_variance: self.noise_variance,
            channel_noise: self.channel_noise,
            path_loss: self.path_loss,
            hata: self.hata(),
            cell_radius_km: self.cell_radius_km,
            moment_bits: self.moment_bits,
            seed: self.seed,
        }
    }

    /// Schema diagnostics; empty when the configuration is runnable.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, message: String| {
            if !ok {
                errors.push(message);
            }
        };

        check(
            self.dataset != DatasetKind::CsvFile || self.dataset_path.is_some(),
            "dataset = \"csv-file\" requires dataset_path".into(),
        );
        check(self.features > 0, "features must be positive".into());
        check(
            self.samples >= self.devices_total,
            format!(
                "samples ({}) must be at least devices_total ({})",
                self.samples, self.devices_total
            ),
        );
        check(
            self.class_separation >= 0.0 && self.class_separation.is_finite(),
            format!(
                "class_separation must be nonnegative (got {})",
                self.class_separation
            ),
        );
        check(
            self.label_noise >= 0.0 && self.label_noise.is_finite(),
            format!("label_noise must be nonnegative (got {})", self.label_noise),
        );
        let classifier = self.model != ModelKind::LinearRegression;
        if classifier {
            check(
                self.classes >= 2,
                format!("classes must be at least 2 (got {})", self.classes),
            );
            check(
                self.dataset != DatasetKind::SyntheticRegression,
                "synthetic-regression data needs model = \"linear_regression\"".into(),
            );
        } else {
            check(
                self.dataset != DatasetKind::SyntheticClassification,
                "linear_regression needs regression data".into(),
            );
            check(
                self.partition == PartitionKind::Iid,
                "heterogeneous partition needs class labels; use partition = \"iid\"".into(),
            );
        }
        if self.partition == PartitionKind::Heterogeneous {
            check(
                (1..=self.classes).contains(&self.classes_per_device),
                format!(
                    "classes_per_device must be in 1..={} (got {})",
                    self.classes, self.classes_per_device
                ),
            );
        }
        if self.model == ModelKind::SmallMlp {
            check(
                (1..=crate::fedtrain::Model::MAX_HIDDEN).contains(&self.hidden),
                format!(
                    "hidden must be in 1..={}",
                    crate::fedtrain::Model::MAX_HIDDEN
                ),
            );
        }

        check(
            (1..=K_MAX).contains(&self.curve_devices),
            format!("curve_devices must be in 1..={K_MAX}"),
        );
        check(
            self.curve_points >= 2,
            "curve_points must be at least 2".into(),
        );
        check(
            self.curve_y_max > 0.0 && self.curve_y_max.is_finite(),
            "curve_y_max must be positive".into(),
        );
        check(
            self.curve_noise_variances
                .iter()
                .all(|v| *v > 0.0 && v.is_finite()),
            "curve_noise_variances must be positive".into(),
        );
        check(
            self.curve_strong_gain > 0.0 && self.curve_strong_gain.is_finite(),
            "curve_strong_gain must be positive".into(),
        );

        check(
            (1..=K_MAX).contains(&self.bound_devices),
            format!("bound_devices must be in 1..={K_MAX}"),
        );
        check(
            self.bound_coordinates > 0,
            "bound_coordinates must be positive".into(),
        );
        for (name, trials) in [
            ("bound_trials", self.bound_trials),
            ("dominance_trials", self.dominance_trials),
            ("corollary_trials", self.corollary_trials),
        ] {
            check(
                trials >= 1000,
                format!("{name} must be at least 1000 (got {trials})"),
            );
        }
        check(
            (1..=K_MAX).contains(&self.corollary_gains.len())
                && self
                    .corollary_gains
                    .iter()
                    .all(|h| *h > 0.0 && h.is_finite()),
            format!("corollary_gains must hold 1..={K_MAX} positive values"),
        );
        check(
            self.corollary_coordinates > 0,
            "corollary_coordinates must be positive".into(),
        );
        check(
            self.convergence_rounds.iter().all(|t| *t > 0),
            "convergence_rounds must be positive".into(),
        );
        check(
            self.convergence_gamma > 0.0 && self.convergence_smoothness > 0.0,
            "convergence_gamma and convergence_smoothness must be positive".into(),
        );

        check(
            self.oracle_configs > 0,
            "oracle_configs must be positive".into(),
        );
        check(
            self.oracle_order >= 32 && self.oracle_order.is_multiple_of(2),
            format!(
                "oracle_order must be even and at least 32 (got {})",
                self.oracle_order
            ),
        );
        check(
            (1..=ORACLE_K_MAX).contains(&self.oracle_max_devices),
            format!("oracle_max_devices must be in 1..={ORACLE_K_MAX}"),
        );

        errors.extend(self.training_config().validate());
        errors
    }
}
