use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{DatasetKind, ExperimentConfig};
use crate::fedtrain::{Dataset, Example};
use crate::rng::stream;
use crate::{Error, Result};

/// Training data and an optional held-out set.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut *rng))
        .collect()
}

fn with_bias(mut x: Vec<f64>, bias: bool) -> Vec<f64> {
    if bias {
        x.push(1.0);
    }
    x
}

/// Gaussian class clusters: centres `~ N(0, separation^2 I)`, unit-variance
/// noise around them, labels cycling through the classes.
fn synthetic_classification(
    cfg: &ExperimentConfig,
    n: usize,
    index: u64,
    centres: &[Vec<f64>],
) -> Result<Dataset> {
    let mut rng = stream(cfg.seed, "dataset", index);
    let examples = (0..n)
        .map(|i| {
            let class = i % cfg.classes;
            let x = centres[class]
                .iter()
                .zip(gaussian(&mut rng, cfg.features, 1.0))
                .map(|(c, z)| c + z)
                .collect();
            Example {
                features: with_bias(x, cfg.bias),
                label: class as f64,
            }
        })
        .collect();
    Dataset::new(examples, Some(cfg.classes))
}

/// `r = w*.x + noise`, `x ~ N(0, I)`, `w* ~ N(0, I)`.
fn synthetic_regression(
    cfg: &ExperimentConfig,
    n: usize,
    index: u64,
    truth: &[f64],
) -> Result<Dataset> {
    let mut rng = stream(cfg.seed, "dataset", index);
    let examples = (0..n)
        .map(|_| {
            let x = with_bias(gaussian(&mut rng, cfg.features, 1.0), cfg.bias);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let label =
                x.iter().zip(truth).map(|(a, b)| a * b).sum::<f64>() + cfg.label_noise * noise;
            Example { features: x, label }
        })
        .collect();
    Dataset::new(examples, None)
}

/// Reads feature/label rows with a header line. `label_column` must be
/// present; every other column is a feature.
pub fn read_csv_dataset(
    path: &Path,
    label_column: &str,
    num_classes: Option<usize>,
    bias: bool,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_at = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let mut examples = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut features = Vec::with_capacity(headers.len());
        let mut label = 0.0;
        for (i, (field, name)) in record.iter().zip(headers.iter()).enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{name}`: `{field}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column `{name}` is not finite"),
                });
            }
            if i == label_at {
                label = value;
            } else {
                features.push(value);
            }
        }
        examples.push(Example {
            features: with_bias(features, bias),
            label,
        });
    }
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(examples, num_classes)
}

/// Builds the dataset described by `cfg`. Synthetic data is a pure function
/// of the seed.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<LoadedData> {
    match cfg.dataset {
        DatasetKind::SyntheticClassification => {
            let mut rng = stream(cfg.seed, "dataset-model", 0);
            let centres: Vec<Vec<f64>> = (0..cfg.classes)
                .map(|_| gaussian(&mut rng, cfg.features, cfg.class_separation))
                .collect();
            let train = synthetic_classification(cfg, cfg.samples, 0, &centres)?;
            let test = (cfg.test_samples > 0)
                .then(|| synthetic_classification(cfg, cfg.test_samples, 1, &centres))
                .transpose()?;
            Ok(LoadedData { train, test })
        }
        DatasetKind::SyntheticRegression => {
            let dim = cfg.features + usize::from(cfg.bias);
            let truth = gaussian(&mut stream(cfg.seed, "dataset-model", 0), dim, 1.0);
            let train = synthetic_regression(cfg, cfg.samples, 0, &truth)?;
            let test = (cfg.test_samples > 0)
                .then(|| synthetic_regression(cfg, cfg.test_samples, 1, &truth))
                .transpose()?;
            Ok(LoadedData { train, test })
        }
        DatasetKind::CsvFile => {
            let path = cfg
                .dataset_path
                .as_deref()
                .ok_or_else(|| Error::Config(vec!["dataset_path is required".into()]))?;
            let classes =
                (cfg.model != crate::fedtrain::ModelKind::LinearRegression).then_some(cfg.classes);
            Ok(LoadedData {
                train: read_csv_dataset(path, &cfg.label_column, classes, cfg.bias)?,
                test: None,
            })
        }
    }
}
